fn main() {
    std::process::exit(ilq::cli::run(std::env::args_os()));
}
