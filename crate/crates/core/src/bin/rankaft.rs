fn main() {
    std::process::exit(rankaft::cli::run(std::env::args_os()));
}
