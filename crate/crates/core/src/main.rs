fn main() {
    std::process::exit(relay_rd::experiments::cli_main(std::env::args_os()));
}
