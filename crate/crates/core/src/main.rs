//! `ctl-repair` command-line entry point.

fn main() {
    let code = ctl_repair::cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
