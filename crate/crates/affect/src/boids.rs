//! Flocking simulator producing position snapshots with ground-truth flock
//! memberships.
//!
//! Boids carry velocities that accumulate steering increments over several
//! micro-moves per observation step: a pull covering a fraction of the
//! offset to the flockmate centroid, a blend of a fraction of the way
//! toward the flockmates' average velocity, and a pull toward the flock's
//! goal point. After steering, the velocity is rescaled to a fixed flight
//! speed, so boids never hover: a flock that has caught up with its goal
//! mills around it instead of freezing, which keeps the flock shapes
//! churning from step to step. On top of that, any pair closer than the
//! separation radius has its distance doubled, with all shoves computed
//! from the same snapshot so one pair's push cannot cascade into another's
//! within a pass. Each flock's goal point rides a fixed lane (y spaced per
//! flock, z zero) and advances along +x at the wind rate, so the flocks fly
//! parallel paths and a flock dragged sideways gets pulled back into its
//! lane. Once per observation step a randomly chosen boid defects to
//! another flock, so cluster changes are smooth trajectories rather than
//! jumps: the goal and centroid pulls steer the defector across the gap
//! into its new flock over a handful of steps.
//!
//! Two scheduled disturbances are supported: a scatter event turns off the
//! centroid and goal pulls and widens the separation radius, dissolving the
//! spatial structure while memberships freeze; a regroup event redraws
//! boids uniformly inside a fresh set of cubes (keeping the current mean x
//! so the trajectory continues forward) under new index-order memberships,
//! with velocities reset.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::ClusterAssignment;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub enum BoidsEvent {
    /// Disable the centroid and goal pulls and repel at `scatter_radius`
    /// from this step on.
    Scatter { t: usize },
    /// Re-seed positions into `flocks` fresh cubes with index-order
    /// memberships, clearing any scatter state.
    Regroup { t: usize, flocks: usize },
}

impl BoidsEvent {
    fn time(&self) -> usize {
        match self {
            BoidsEvent::Scatter { t } | BoidsEvent::Regroup { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoidsConfig {
    pub flocks: usize,
    pub boids_per_flock: usize,
    /// Side length of the initial placement cube per flock.
    pub cube_side: f64,
    /// Distance between neighboring flock lanes along the y axis.
    pub flock_spacing: f64,
    /// Fraction of the offset to the flockmate centroid added to the
    /// velocity per micro-move.
    pub cohesion: f64,
    /// Boids closer than this have their distance doubled.
    pub separation_radius: f64,
    /// Separation radius while scattered.
    pub scatter_radius: f64,
    /// Fraction of the way the velocity moves toward the flockmates'
    /// average velocity per micro-move.
    pub alignment: f64,
    /// Fraction of the offset to the flock's goal point added to the
    /// velocity per micro-move.
    pub goal_pull: f64,
    /// Flight speed: the velocity is rescaled to this magnitude every
    /// micro-move, so boids never hover and a flock at its goal mills
    /// around it instead of freezing.
    pub speed: f64,
    /// Lane speed: how far every goal point advances along +x per
    /// micro-move.
    pub wind: f64,
    pub moves_per_step: usize,
    pub switches_per_step: usize,
    pub steps: usize,
    pub events: Vec<BoidsEvent>,
}

impl Default for BoidsConfig {
    fn default() -> Self {
        Self {
            flocks: 4,
            boids_per_flock: 25,
            cube_side: 60.0,
            flock_spacing: 65.0,
            cohesion: 0.01,
            separation_radius: 10.0,
            scatter_radius: 20.0,
            alignment: 0.125,
            goal_pull: 0.07,
            speed: 8.0,
            wind: 1.0,
            moves_per_step: 5,
            switches_per_step: 1,
            steps: 41,
            events: Vec::new(),
        }
    }
}

impl BoidsConfig {
    pub fn n(&self) -> usize {
        self.flocks * self.boids_per_flock
    }

    fn validate(&self) -> Result<()> {
        if self.flocks == 0 || self.boids_per_flock == 0 || self.steps == 0 {
            return Err(Error::BadConfig(
                "need at least one flock, one boid per flock and one step".into(),
            ));
        }
        if self.moves_per_step == 0 {
            return Err(Error::BadConfig("need at least one move per step".into()));
        }
        if !(self.cube_side > 0.0) || self.flock_spacing < 0.0 {
            return Err(Error::BadConfig("placement geometry must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.cohesion)
            || !(0.0..=1.0).contains(&self.alignment)
            || !(0.0..=1.0).contains(&self.goal_pull)
        {
            return Err(Error::BadConfig("steering fractions must lie in [0,1]".into()));
        }
        if self.separation_radius < 0.0
            || self.scatter_radius < 0.0
            || self.speed < 0.0
            || self.wind < 0.0
        {
            return Err(Error::BadConfig("kinematic parameters must be nonnegative".into()));
        }
        for event in &self.events {
            if event.time() >= self.steps {
                return Err(Error::BadConfig("event scheduled beyond the horizon".into()));
            }
            if let BoidsEvent::Regroup { flocks, .. } = event {
                if *flocks == 0 || *flocks > self.n() {
                    return Err(Error::BadConfig("regroup flock count out of range".into()));
                }
            }
        }
        Ok(())
    }
}

/// One observation: boid positions (n x 3) and their true memberships.
#[derive(Debug, Clone)]
pub struct BoidsStep {
    pub positions: Array2<f64>,
    pub memberships: ClusterAssignment,
}

fn uniform_in_cubes(
    n: usize,
    labels: &[usize],
    center_x: f64,
    side: f64,
    spacing: f64,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let mut positions = Array2::zeros((n, 3));
    for i in 0..n {
        let center = [center_x, labels[i] as f64 * spacing, 0.0];
        for d in 0..3 {
            positions[[i, d]] = center[d] + (rng.random::<f64>() - 0.5) * side;
        }
    }
    positions
}

fn index_order_labels(n: usize, flocks: usize) -> Vec<usize> {
    // Spread objects over flocks as evenly as possible, earlier flocks
    // taking the remainder.
    let base = n / flocks;
    let extra = n % flocks;
    let mut labels = Vec::with_capacity(n);
    for f in 0..flocks {
        let size = base + usize::from(f < extra);
        labels.extend(std::iter::repeat_n(f, size));
    }
    labels
}

/// Doubles the distance between every pair closer than `radius`. All
/// shoves are computed against the same snapshot and applied together, so
/// each partner of a close pair moves half their separation vector outward
/// (summed over its close partners) and no shove feeds into another within
/// the pass.
fn separation_pass(positions: &mut Array2<f64>, radius: f64) {
    if radius <= 0.0 {
        return;
    }
    let n = positions.nrows();
    let mut shove = Array2::zeros((n, 3));
    for i in 0..n {
        for j in (i + 1)..n {
            let mut delta = [0.0; 3];
            let mut dist_sq = 0.0;
            for d in 0..3 {
                delta[d] = positions[[i, d]] - positions[[j, d]];
                dist_sq += delta[d] * delta[d];
            }
            if dist_sq < radius * radius {
                for d in 0..3 {
                    let half = delta[d] / 2.0;
                    shove[[i, d]] += half;
                    shove[[j, d]] -= half;
                }
            }
        }
    }
    *positions += &shove;
}

struct FlockSums {
    position: Vec<Array1<f64>>,
    velocity: Vec<Array1<f64>>,
    size: Vec<usize>,
}

fn flock_sums(
    positions: &Array2<f64>,
    velocities: &Array2<f64>,
    labels: &[usize],
    k: usize,
) -> FlockSums {
    let mut sums = FlockSums {
        position: vec![Array1::zeros(3); k],
        velocity: vec![Array1::zeros(3); k],
        size: vec![0; k],
    };
    for (i, &f) in labels.iter().enumerate() {
        for d in 0..3 {
            sums.position[f][d] += positions[[i, d]];
            sums.velocity[f][d] += velocities[[i, d]];
        }
        sums.size[f] += 1;
    }
    sums
}

/// Runs the simulation, returning one snapshot per observation step.
/// Membership switches take effect after the step they are drawn in, so a
/// defector's recorded label and its motion change together.
pub fn boids_run(config: &BoidsConfig, seed: u64) -> Result<Vec<BoidsStep>> {
    config.validate()?;
    let n = config.n();
    let ids: Vec<String> = (0..n).map(|i| format!("b{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut k = config.flocks;
    let mut labels = index_order_labels(n, k);
    let mut positions = uniform_in_cubes(
        n,
        &labels,
        0.0,
        config.cube_side,
        config.flock_spacing,
        &mut rng,
    );
    let mut velocities = Array2::zeros((n, 3));
    let mut scattered = false;
    let mut goal_x = 0.0;

    let mut outputs = Vec::with_capacity(config.steps);
    for t in 0..config.steps {
        for event in config.events.iter().filter(|e| e.time() == t) {
            match event {
                BoidsEvent::Scatter { .. } => {
                    scattered = true;
                }
                BoidsEvent::Regroup { flocks, .. } => {
                    let center_x = positions.column(0).mean().unwrap_or(0.0);
                    k = *flocks;
                    labels = index_order_labels(n, k);
                    positions = uniform_in_cubes(
                        n,
                        &labels,
                        center_x,
                        config.cube_side,
                        config.flock_spacing,
                        &mut rng,
                    );
                    velocities.fill(0.0);
                    scattered = false;
                    goal_x = center_x;
                }
            }
        }

        let radius = if scattered {
            config.scatter_radius
        } else {
            config.separation_radius
        };
        for _ in 0..config.moves_per_step {
            goal_x += config.wind;
            let sums = flock_sums(&positions, &velocities, &labels, k);
            let old_pos = positions.clone();
            let old_vel = velocities.clone();
            for i in 0..n {
                let f = labels[i];
                let mates = sums.size[f] - 1;
                let goal = [goal_x, f as f64 * config.flock_spacing, 0.0];
                let mut v = [old_vel[[i, 0]], old_vel[[i, 1]], old_vel[[i, 2]]];
                for (d, v_d) in v.iter_mut().enumerate() {
                    if !scattered {
                        *v_d += config.goal_pull * (goal[d] - old_pos[[i, d]]);
                        if mates > 0 {
                            let centroid =
                                (sums.position[f][d] - old_pos[[i, d]]) / mates as f64;
                            *v_d += config.cohesion * (centroid - old_pos[[i, d]]);
                        }
                    }
                    if mates > 0 {
                        let mean_vel = (sums.velocity[f][d] - old_vel[[i, d]]) / mates as f64;
                        *v_d += config.alignment * (mean_vel - *v_d);
                    }
                }
                let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if norm > 1e-12 {
                    for v_d in v.iter_mut() {
                        *v_d *= config.speed / norm;
                    }
                }
                for d in 0..3 {
                    velocities[[i, d]] = v[d];
                    positions[[i, d]] += v[d];
                }
            }
            separation_pass(&mut positions, radius);
        }

        let memberships = ClusterAssignment::with_label_space(ids.clone(), labels.clone(), k)?;
        outputs.push(BoidsStep {
            positions: positions.clone(),
            memberships,
        });

        if !scattered && k >= 2 && config.switches_per_step > 0 {
            for _ in 0..config.switches_per_step {
                let boid = rng.random_range(0..n);
                let offset = rng.random_range(1..k);
                labels[boid] = (labels[boid] + offset) % k;
            }
        }
    }
    Ok(outputs)
}
