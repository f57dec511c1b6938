fn main() {
    std::process::exit(photonsort::cli::run(std::env::args_os()));
}
