fn main() {
    std::process::exit(fwdgrad::harness::cli_main(std::env::args_os()));
}
