fn main() {
    std::process::exit(mobility::cli::run(std::env::args_os()));
}
