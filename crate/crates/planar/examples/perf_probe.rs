use std::time::Instant;

use nalgebra::DMatrix;
use planar::agents::{DdpgAgent, DdpgConfig};
use planar::env::Environment;

fn main() {
    // Raw matmul throughput, f32, critic-layer sized.
    let a = DMatrix::<f32>::from_element(400, 4, 0.5);
    let b = DMatrix::<f32>::from_element(4, 64, 0.25);
    let t = Instant::now();
    for _ in 0..1000 {
        let _ = &a * &b;
    }
    println!("400x4 * 4x64: {:.3} ms", t.elapsed().as_secs_f64());
    let a = DMatrix::<f32>::from_element(300, 400, 0.5);
    let b = DMatrix::<f32>::from_element(400, 64, 0.25);
    let t = Instant::now();
    for _ in 0..1000 {
        let _ = &a * &b;
    }
    let dt = t.elapsed().as_secs_f64();
    println!(
        "300x400 * 400x64 x1000: {:.3} s ({:.1} GFLOP/s)",
        dt,
        2.0 * 300.0 * 400.0 * 64.0 * 1000.0 / dt / 1e9
    );

    // Env stepping alone.
    let mut env = planar::suite::load("point_mass", "easy", 0).unwrap();
    env.reset();
    let t = Instant::now();
    for _ in 0..5000 {
        let ts = env.step(&[0.3, -0.2]).unwrap();
        if ts.last() {
            env.reset();
        }
    }
    println!("point_mass env: {:.1} steps/s", 5000.0 / t.elapsed().as_secs_f64());

    // Agent update alone.
    let mut agent = DdpgAgent::new(4, 2, vec![-1.0, -1.0], vec![1.0, 1.0], DdpgConfig::default(), 0);
    for i in 0..2000 {
        let x = i as f64 * 0.001;
        agent.observe(&[x, 0.0, 0.1, 0.2], &[0.5, -0.5], 0.3, &[x, 0.1, 0.0, 0.0], 1.0);
    }
    let t = Instant::now();
    for _ in 0..200 {
        agent.update().unwrap();
    }
    println!("ddpg update: {:.1} updates/s", 200.0 / t.elapsed().as_secs_f64());

    // Greedy act alone.
    let t = Instant::now();
    for _ in 0..5000 {
        let _ = agent.act_greedy(&[0.1, 0.2, 0.3, 0.4]);
    }
    println!("greedy act: {:.0} acts/s", 5000.0 / t.elapsed().as_secs_f64());
}
