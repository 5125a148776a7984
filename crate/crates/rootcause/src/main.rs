fn main() {
    std::process::exit(rootcause::cli::run(std::env::args_os()));
}
