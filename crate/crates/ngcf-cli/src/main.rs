fn main() {
    std::process::exit(ngcf_cli::run(std::env::args_os()));
}
