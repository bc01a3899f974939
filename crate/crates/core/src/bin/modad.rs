fn main() {
    std::process::exit(modad::cli::run(std::env::args_os()));
}
