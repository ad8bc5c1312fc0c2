use std::io::Write;

fn main() {
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let mut err = std::io::stderr();
    let code = betageo_cli::run(std::env::args_os(), &mut out, &mut err);
    let _ = out.flush();
    drop(out);
    std::process::exit(code);
}
