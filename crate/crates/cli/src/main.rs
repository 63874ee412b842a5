fn main() {
    std::process::exit(newsrag_cli::run(std::env::args_os()));
}
