fn main() {
    std::process::exit(wqscreen::cli::run(std::env::args_os()));
}
