use cotflow::ot::solve_assignment;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    for &n in &[1000usize, 2000, 4000, 5000] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // geometric cost like the real workload: squared distances of 2D points
        let pts: Vec<(f64, f64)> = (0..2 * n)
            .map(|_| (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect();
        let mut c = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let dx = pts[i].0 - pts[n + j].0;
                let dy = pts[i].1 - pts[n + j].1;
                c[[i, j]] = dx * dx + dy * dy;
            }
        }
        let t = Instant::now();
        let sol = solve_assignment(&c).unwrap();
        let cost: f64 = (0..n).map(|i| c[[i, sol[i]]]).sum::<f64>() / n as f64;
        println!("n={n}: {:?}, avg cost {cost:.6}", t.elapsed());
    }
}
