fn main() {
    std::process::exit(cascade_core::harness::cli::cli_main(std::env::args_os()));
}
