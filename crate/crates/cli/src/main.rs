fn main() {
    std::process::exit(pmlsim_cli::run());
}
