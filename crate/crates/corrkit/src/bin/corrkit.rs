fn main() {
    std::process::exit(corrkit::cli::run(std::env::args_os()));
}
