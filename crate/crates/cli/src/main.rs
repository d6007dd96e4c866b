fn main() {
    std::process::exit(thermotopo_cli::cli_main(std::env::args_os()));
}
