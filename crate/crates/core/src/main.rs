fn main() {
    std::process::exit(optree::cli::run(std::env::args_os()));
}
