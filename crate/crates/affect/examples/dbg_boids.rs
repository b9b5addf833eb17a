use affect::boids::{boids_run, BoidsConfig};

fn main() {
    let mut config = BoidsConfig::default();
    for arg in std::env::args().skip(1) {
        let (key, value) = arg.split_once('=').expect("key=value");
        match key {
            "speed" => config.speed = value.parse().unwrap(),
            "spacing" => config.flock_spacing = value.parse().unwrap(),
            "steps" => config.steps = value.parse().unwrap(),
            "seed" => {}
            other => panic!("unknown key {other}"),
        }
    }
    let steps = boids_run(&config, 1).unwrap();
    for (t, step) in steps.iter().enumerate() {
        let k = step.memberships.k();
        let mut diam = vec![0.0f64; k];
        let mut lane_y = vec![0.0f64; k];
        let mut sizes = vec![0usize; k];
        let n = step.positions.nrows();
        let label = |i: usize| step.memberships.label_of(i);
        for i in 0..n {
            lane_y[label(i)] += step.positions[[i, 1]];
            sizes[label(i)] += 1;
        }
        for f in 0..k {
            lane_y[f] /= sizes[f] as f64;
        }
        let mut min_cross = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let d: f64 = (0..3)
                    .map(|dd| (step.positions[[i, dd]] - step.positions[[j, dd]]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if label(i) == label(j) {
                    if d > diam[label(i)] {
                        diam[label(i)] = d;
                    }
                } else if d < min_cross {
                    min_cross = d;
                }
            }
        }
        let max_diam = diam.iter().cloned().fold(0.0f64, f64::max);
        println!(
            "t={t:2} max_diam {max_diam:6.1} min_cross {min_cross:6.1} lanes {:?}",
            lane_y.iter().map(|y| (*y * 10.0).round() / 10.0).collect::<Vec<_>>()
        );
    }
}
