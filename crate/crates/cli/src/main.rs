fn main() {
    std::process::exit(emphadet_cli::run(std::env::args_os()));
}
