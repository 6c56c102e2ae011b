fn main() {
    let outcome = gridflow::runner::run_command(std::env::args_os());
    std::process::exit(outcome.status);
}
