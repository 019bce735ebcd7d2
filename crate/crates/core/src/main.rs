fn main() {
    std::process::exit(hjdefect::cli::run(std::env::args_os()));
}
