fn main() {
    std::process::exit(mlcraist::cli::run(std::env::args_os()));
}
