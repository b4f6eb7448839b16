use cotflow::bench::{run_2d_benchmark, Synthetic2DBenchOptions};
use cotflow::datasets::Synthetic2D;
use cotflow::flow::TrainConfig;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4000);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3e-4);
    let sigma: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-2);
    let batch: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(256);
    let mut opts = Synthetic2DBenchOptions::<f64>::new(Synthetic2D::Moons);
    opts.n_test = 2_000;
    opts.n_test_sets = 2;
    opts.with_fm_baseline = false;
    opts.train = TrainConfig { steps, learning_rate: lr, sigma, batch_size: batch, ..TrainConfig::default() };
    let t = Instant::now();
    let res = run_2d_benchmark(&opts).unwrap();
    let (w2m, w2s) = res.cot_fm.w2_mean_sd();
    let (mmdm, _) = res.cot_fm.mmd_mean_sd();
    println!("steps={steps} lr={lr} sigma={sigma} batch={batch}: W2 = {w2m:.4} ± {w2s:.4}, MMD = {mmdm:.6}, loss {:.4}, {:?}", res.final_loss_cot_fm, t.elapsed());
}
