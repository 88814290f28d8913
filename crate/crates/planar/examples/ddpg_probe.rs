use std::time::Instant;

use planar::agents::DdpgConfig;
use planar::bench::{train_ddpg, TrainSchedule};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let total: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30_000);
    let schedule = TrainSchedule {
        total_steps: total,
        eval_every: 5000,
        eval_episodes: 10,
        episode_steps: 1000,
        stop_at_return: None,
    };
    let start = Instant::now();
    let rows = train_ddpg("point_mass", "easy", seed, &schedule, DdpgConfig::default()).unwrap();
    let dt = start.elapsed().as_secs_f64();
    println!(
        "seed {seed}: {total} steps in {dt:.1} s ({:.0} steps/s)",
        total as f64 / dt
    );
    for row in rows {
        println!("  step {:>7}: eval return {:.1}", row.env_steps, row.mean_return);
    }
}
