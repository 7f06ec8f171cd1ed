fn main() {
    std::process::exit(susyspec::cli::run(std::env::args_os()));
}
