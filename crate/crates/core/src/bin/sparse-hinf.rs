fn main() {
    std::process::exit(sparse_hinf::cli::run(std::env::args_os()));
}
