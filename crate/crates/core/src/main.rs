fn main() {
    std::process::exit(coagbreak::cli::cli_main(std::env::args_os()));
}
