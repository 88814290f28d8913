use std::time::Instant;

use planar::agents::DdpgConfig;
use planar::bench::{train_ddpg, TrainSchedule};

fn main() {
    let schedule = TrainSchedule {
        total_steps: 60_000,
        eval_every: 5000,
        eval_episodes: 10,
        episode_steps: 1000,
        stop_at_return: Some(500.0),
    };
    for seed in [1u64, 2, 3, 4] {
        let start = Instant::now();
        let rows =
            train_ddpg("point_mass", "easy", seed, &schedule, DdpgConfig::default()).unwrap();
        let last = rows.last().unwrap();
        println!(
            "seed {seed}: stopped at {} steps, eval {:.1} ({:.0} s)",
            last.env_steps,
            last.mean_return,
            start.elapsed().as_secs_f64()
        );
    }
}
