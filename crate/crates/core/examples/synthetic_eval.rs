//! Runs the synthetic 4-class retrieval experiment and prints precision per
//! variant.
//!
//! Usage: synthetic_eval [seed] [noise_sigma] [batch_size] [alpha]

use std::time::Instant;

use semhash::synthetic::SyntheticExperiment;

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> semhash::Result<()> {
    let mut exp = SyntheticExperiment::default();
    let seed: u64 = arg(1, 0);
    exp.train.noise_sigma = arg(2, exp.train.noise_sigma);
    exp.train.batch_size = arg(3, exp.train.batch_size);
    exp.eval.query.gsa_alpha = arg(4, exp.eval.query.gsa_alpha);
    exp.eval.query.gsa_sigma = exp.train.noise_sigma;

    let start = Instant::now();
    let run = exp.run(seed)?;
    let r = &run.report;
    println!(
        "seed {seed}: {:.1}s, V={}, loss {:.3} -> {:.3}, {} buckets",
        start.elapsed().as_secs_f64(),
        run.store.dim(),
        run.epoch_loss.first().copied().unwrap_or(f64::NAN),
        run.epoch_loss.last().copied().unwrap_or(f64::NAN),
        run.engine.index().bucket_count()
    );
    println!(
        "density {:.3}, mean preselection {:.1}, empty {}",
        r.density(),
        r.mean_preselection_size,
        r.empty_preselections
    );
    for c in &r.curves {
        println!("{:15} p@1 {:.3}  p@10 {:.4}  p@100 {:.3}", c.variant.as_str(), c.at(1), c.at(10), c.at(100));
    }
    Ok(())
}
