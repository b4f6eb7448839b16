use cotflow::datasets::{fresh_y_pool, sample_2d, Synthetic2D, Synthetic2DSpec};
use cotflow::flow::{train, MeasureSampler, ProductSourceSampler, TrainConfig};
use cotflow::metrics::w2_empirical;
use cotflow::ode::{integrate_batch, IntegratorConfig};
use cotflow::ot::solve_assignment;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use cotflow::scalar::Scalar;

fn main() {
    let n_train = 20_000;
    let n_test = 5_000;
    let spec = Synthetic2DSpec { name: Synthetic2D::Moons, n: n_train, seed: 0 };
    let target_data = sample_2d::<f64>(&spec).unwrap();
    let y_pool = fresh_y_pool::<f64>(&spec, n_train).unwrap();
    let target = MeasureSampler::new(target_data);
    let source = ProductSourceSampler::new(y_pool, 1).unwrap();
    let cfg = TrainConfig::<f64> { steps: 4000, learning_rate: 1e-3, ..TrainConfig::default() };
    let model = train(&source, &target, &cfg).unwrap();

    let reference = sample_2d::<f64>(&Synthetic2DSpec { name: Synthetic2D::Moons, n: n_test, seed: 1001 }).unwrap();
    let fresh = sample_2d::<f64>(&Synthetic2DSpec { name: Synthetic2D::Moons, n: n_test, seed: 2001 }).unwrap();
    let mut states = Array2::zeros((n_test, 2));
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    for i in 0..n_test {
        states[[i, 0]] = fresh.y(i)[0];
        states[[i, 1]] = f64::standard_normal(&mut rng);
    }
    let generated = integrate_batch(&model, &states.view(), &IntegratorConfig::default()).unwrap();

    let w2 = w2_empirical(&generated.view(), &reference.points(), 0).unwrap();
    println!("W2 = {w2:.4}");

    // percentiles of |u|
    let mut gu: Vec<f64> = generated.column(1).iter().map(|x| x.abs()).collect();
    let mut ru: Vec<f64> = reference.points().column(1).iter().map(|x| x.abs()).collect();
    gu.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ru.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for q in [0.5, 0.9, 0.99, 0.999, 1.0] {
        let k = ((n_test as f64 * q) as usize).min(n_test - 1);
        println!("|u| q{q}: generated {:.3}, reference {:.3}", gu[k], ru[k]);
    }

    // assignment-cost concentration: how much of W2^2 sits in the worst 1%?
    let mut cost = Array2::<f64>::zeros((n_test, n_test));
    for i in 0..n_test {
        for j in 0..n_test {
            let dy = generated[[i, 0]] - reference.points()[[j, 0]];
            let du = generated[[i, 1]] - reference.points()[[j, 1]];
            cost[[i, j]] = dy * dy + du * du;
        }
    }
    let asg = solve_assignment(&cost).unwrap();
    let mut per_pair: Vec<f64> = (0..n_test).map(|i| cost[[i, asg[i]]]).collect();
    per_pair.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let total: f64 = per_pair.iter().sum();
    let worst1: f64 = per_pair[n_test - n_test / 100..].iter().sum();
    let worst10: f64 = per_pair[n_test - n_test / 10..].iter().sum();
    println!(
        "total W2^2*n = {total:.3}; worst 1% share = {:.1}%, worst 10% share = {:.1}%",
        100.0 * worst1 / total,
        100.0 * worst10 / total
    );
}
