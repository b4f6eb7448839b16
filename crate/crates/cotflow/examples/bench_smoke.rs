use cotflow::bench::{run_2d_benchmark, Synthetic2DBenchOptions};
use cotflow::datasets::Synthetic2D;
use cotflow::flow::TrainConfig;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1500);
    let n_train: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let n_test: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2_000);
    let mut opts = Synthetic2DBenchOptions::<f64>::new(Synthetic2D::Moons);
    opts.n_train = n_train;
    opts.n_test = n_test;
    opts.n_test_sets = 2;
    opts.train = TrainConfig { steps, ..TrainConfig::default() };
    opts.with_fm_baseline = true;
    let t = Instant::now();
    let res = run_2d_benchmark(&opts).unwrap();
    let (w2m, w2s) = res.cot_fm.w2_mean_sd();
    let (mmdm, _) = res.cot_fm.mmd_mean_sd();
    println!("COT-FM: W2 = {w2m:.4} ± {w2s:.4}, MMD = {mmdm:.6}, final loss {:.4}", res.final_loss_cot_fm);
    if let Some(fm) = &res.fm {
        let (w2m_f, w2s_f) = fm.w2_mean_sd();
        let (mmdm_f, _) = fm.mmd_mean_sd();
        println!("FM:     W2 = {w2m_f:.4} ± {w2s_f:.4}, MMD = {mmdm_f:.6}");
    }
    println!("elapsed: {:?}", t.elapsed());
}
