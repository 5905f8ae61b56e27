fn main() {
    std::process::exit(did_cbps::cli::run(std::env::args_os()));
}
