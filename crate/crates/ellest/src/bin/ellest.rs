fn main() {
    std::process::exit(ellest::cli::run(std::env::args_os()));
}
