//! Runs a desk preset and prints one line per case and method.
//!
//! `cargo run --release --example desk_suite -- desk-B [lambda]`

use vsharp_core::suite::{mean_by_method, run_suite, SuiteConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "desk-B".into());
    let mut cfg = SuiteConfig::preset(&preset).expect("known preset");
    if let Some(l) = args.next() {
        let lambda: f64 = l.parse().expect("lambda");
        cfg.method_config.vsharp.denoiser.lambda = lambda;
        cfg.method_config.arn.regularizer.lambda = lambda;
    }
    if let Ok(m) = std::env::var("METHODS") {
        cfg.methods = m.split(',').map(|s| s.parse().expect("method")).collect();
    }
    if let Ok(r) = std::env::var("RHO") {
        cfg.method_config.vsharp.rho = r.parse().expect("rho");
    }
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let results = run_suite(&cfg, threads).expect("suite runs");
    let mut reports = Vec::new();
    for (name, outcomes) in &results {
        for o in outcomes {
            let r = &o.report;
            println!("{name:<16} {:<12} ssim {:.4} psnr {:7.3} nmse {:.5} {:6.2}s", r.method, r.ssim, r.psnr, r.nmse, r.wall_seconds);
            reports.push(r.clone());
        }
    }
    for (m, s) in mean_by_method(&reports, |r| r.ssim) {
        println!("mean ssim {m:<12} {s:.4}");
    }
}
