fn main() {
    std::process::exit(smoothwave::cli::run(std::env::args_os()));
}
