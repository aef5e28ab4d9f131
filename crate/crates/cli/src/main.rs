use clap::Parser;

fn main() {
    let cli = lvcomp_cli::Cli::parse();
    if let Err(e) = lvcomp_cli::run(cli) {
        eprintln!("lvcomp: {e}");
        std::process::exit(e.exit_code());
    }
}
