use std::time::Instant;

use nalgebra::DMatrix;
use planar::agents::nn::{Activation, Critic, Mlp};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let actor = Mlp::new(&mut rng, &[4, 300, 200, 2], Activation::Tanh, 3e-3);
    let critic = Critic::new(&mut rng, 4, 2, (400, 300));
    let obs = DMatrix::<f32>::from_fn(4, 64, |i, j| ((i * j) as f32).sin());
    let act = DMatrix::<f32>::from_fn(2, 64, |i, j| ((i + j) as f32).cos());
    let n = 300;

    let t = Instant::now();
    for _ in 0..n {
        let _ = critic.forward_cached(&obs, &act);
    }
    println!("critic forward_cached: {:.3} ms", t.elapsed().as_secs_f64() * 1e3 / n as f64);

    let cache = critic.forward_cached(&obs, &act);
    let dq = DMatrix::from_element(1, 64, 1.0);
    let t = Instant::now();
    for _ in 0..n {
        let _ = critic.backward(&cache, &dq);
    }
    println!("critic backward: {:.3} ms", t.elapsed().as_secs_f64() * 1e3 / n as f64);

    let t = Instant::now();
    for _ in 0..n {
        let _ = actor.forward_cached(&obs);
    }
    println!("actor forward_cached: {:.3} ms", t.elapsed().as_secs_f64() * 1e3 / n as f64);

    let acache = actor.forward_cached(&obs);
    let dy = DMatrix::from_element(2, 64, 1.0);
    let t = Instant::now();
    for _ in 0..n {
        let _ = actor.backward(&acache, &dy);
    }
    println!("actor backward: {:.3} ms", t.elapsed().as_secs_f64() * 1e3 / n as f64);

    let t = Instant::now();
    for _ in 0..n {
        let _ = actor.forward(&obs);
    }
    println!("actor forward: {:.3} ms", t.elapsed().as_secs_f64() * 1e3 / n as f64);
}
