use cotflow::bench::{run_2d_benchmark, Synthetic2DBenchOptions};
use cotflow::datasets::Synthetic2D;
use cotflow::flow::{TrainConfig, ValidationConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4000);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let eps: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-2);
    let sigma: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-2);
    let batch: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(256);
    let n_test: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let width: usize = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(256);
    let mut opts = Synthetic2DBenchOptions::<f64>::new(Synthetic2D::Moons);
    opts.n_test = n_test;
    opts.n_test_sets = 2;
    opts.with_fm_baseline = false;
    opts.train = TrainConfig {
        steps,
        learning_rate: lr,
        epsilon: eps,
        sigma,
        batch_size: batch,
        width,
        validation: Some(ValidationConfig::default()),
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let res = run_2d_benchmark(&opts).unwrap();
    let (w2m, w2s) = res.cot_fm.w2_mean_sd();
    let (mmdm, _) = res.cot_fm.mmd_mean_sd();
    println!(
        "steps={steps} lr={lr} eps={eps} sigma={sigma} batch={batch} n_test={n_test} width={width}: W2 = {w2m:.4} ± {w2s:.4}, MMD = {mmdm:.6}, loss {:.4}, {:?}",
        res.final_loss_cot_fm,
        t.elapsed()
    );
}
