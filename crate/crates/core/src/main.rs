fn main() {
    std::process::exit(graphprec::cli::run(std::env::args_os()));
}
