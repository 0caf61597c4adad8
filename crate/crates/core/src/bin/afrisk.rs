fn main() {
    std::process::exit(afrisk::cli::run(std::env::args_os()));
}
