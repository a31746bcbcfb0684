use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AppearanceModel, ConspicuityMaps, DepositMode, SwarmParams};
use crate::cloud::ObstacleMask;
use crate::raster::{Grid, RgbImage};

#[derive(Debug, Clone, PartialEq)]
pub struct PheromonePair {
    pub color: Grid<f32>,
    pub intensity: Grid<f32>,
}

impl PheromonePair {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { color: Grid::filled(width, height, 0.0), intensity: Grid::filled(width, height, 0.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Population {
    Color,
    Intensity,
}

/// Final state of one agent: its trajectory starts at the spawn pixel, so
/// `trajectory.len() == moves + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub population: Population,
    pub trajectory: Vec<(usize, usize)>,
    pub moves: usize,
    pub crossings: usize,
    /// Per-step deposit actually laid, `None` when cut by epsilon or when the
    /// agent never moved.
    pub deposit: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SwarmOutcome {
    pub pheromone: PheromonePair,
    pub agents: Vec<AgentRecord>,
}

/// Obstacle-modulated per-step deposit for an agent that crossed `crossings`
/// masked pixels in `moves` moves. `None` for an agent that never moved.
pub fn pheromone_deposit(base: f64, crossings: usize, moves: usize, mode: DepositMode) -> Option<f64> {
    if moves == 0 {
        return None;
    }
    let clear = (1.0 - crossings as f64 / moves as f64).max(0.0).sqrt();
    Some(match mode {
        DepositMode::Additive => base + clear,
        DepositMode::Multiplicative => base * clear,
    })
}

/// Number of masked pixels among the positions reached by each move.
pub fn obstacle_crossings(moved_to: &[(usize, usize)], mask: &ObstacleMask) -> usize {
    moved_to.iter().filter(|&&(x, y)| mask.is_set(x, y)).count()
}

/// Mean of both max-normalised pheromone maps, max-normalised again.
pub fn combine_pheromone(color: &Grid<f32>, intensity: &Grid<f32>) -> Grid<f32> {
    let a = color.max_normalized();
    let b = intensity.max_normalized();
    Grid::from_fn(a.width(), a.height(), |x, y| (a.get(x, y) + b.get(x, y)) * 0.5).max_normalized()
}

struct Agent {
    population: Population,
    x: usize,
    y: usize,
    moves: usize,
    crossings: usize,
    bias: i8,
    trajectory: Vec<(usize, usize)>,
}

/// Row-wise runs of above-row-mean conspicuity, used by the centring
/// behaviour.
struct RowRuns(Vec<Vec<(usize, usize)>>);

impl RowRuns {
    fn new(map: &Grid<f32>) -> Self {
        let rows = (0..map.height())
            .map(|y| {
                let row = map.row(y);
                let mean = row.iter().map(|&v| v as f64).sum::<f64>() / row.len() as f64;
                let mut runs = Vec::new();
                let mut x = 0;
                while x < row.len() {
                    if row[x] as f64 > mean {
                        let l = x;
                        while x < row.len() && row[x] as f64 > mean {
                            x += 1;
                        }
                        runs.push((l, x - 1));
                    } else {
                        x += 1;
                    }
                }
                runs
            })
            .collect();
        Self(rows)
    }

    /// Run containing `x`, else the closest run (left wins ties).
    fn run_for(&self, x: usize, y: usize) -> Option<(usize, usize)> {
        let mut best: Option<((usize, usize), usize)> = None;
        for &(l, r) in &self.0[y] {
            let dist = if x < l { l - x } else { x.saturating_sub(r) };
            if best.is_none_or(|(_, d)| dist < d) {
                best = Some(((l, r), dist));
            }
        }
        best.map(|(run, _)| run)
    }
}

/// 3×3 mean of the pheromone map, divided by its maximum.
fn pheromone_view(map: &Grid<f32>) -> Grid<f32> {
    let (w, h) = map.dims();
    let mean = Grid::from_fn(w, h, |x, y| {
        let mut s = 0.0f32;
        let mut n = 0.0f32;
        for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
            for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                s += map.get(xx, yy);
                n += 1.0;
            }
        }
        s / n
    });
    let m = mean.max_value();
    if m <= 1e-12 {
        return Grid::filled(w, h, 0.0);
    }
    mean.map(|&v| v / m)
}

struct Context<'a> {
    maps: &'a ConspicuityMaps,
    runs: [RowRuns; 2],
    rgb: &'a RgbImage,
    mask: &'a ObstacleMask,
    appearance: &'a AppearanceModel,
    params: &'a SwarmParams,
    h_max: usize,
}

impl Context<'_> {
    fn slot(p: Population) -> usize {
        match p {
            Population::Color => 0,
            Population::Intensity => 1,
        }
    }

    fn conspicuity(&self, p: Population) -> &Grid<f32> {
        match p {
            Population::Color => &self.maps.color,
            Population::Intensity => &self.maps.intensity,
        }
    }

    fn score(&self, agent: &Agent, view: &Grid<f32>, cx: usize, cy: usize, dx: i8) -> f64 {
        let w = &self.params.weights;
        let pher = *view.get(cx, cy) as f64;
        let sal = *self.conspicuity(agent.population).get(cx, cy) as f64;
        let app = self.appearance.likelihood(*self.rgb.get(cx, cy));
        let inertia = if dx == agent.bias { 1.0 } else { 0.0 };
        let centering = match self.runs[Self::slot(agent.population)].run_for(agent.x, agent.y) {
            Some((l, r)) => {
                let mid = (l + r) as f64 / 2.0;
                let half = ((r - l + 1) as f64 / 2.0).max(1.0);
                (1.0 - (cx as f64 - mid).abs() / half).max(0.0)
            }
            None => 0.0,
        };
        w.pheromone * pher + w.saliency * sal + w.appearance * app + w.inertia * inertia + w.centering * centering
    }

    /// One upward move; ties go to the leftmost candidate.
    fn step(&self, agent: &mut Agent, view: &Grid<f32>) {
        let width = view.width();
        let ny = agent.y - 1;
        let mut best: Option<(f64, usize, i8)> = None;
        for dx in [-1i8, 0, 1] {
            let nx = agent.x as i64 + dx as i64;
            if nx < 0 || nx >= width as i64 {
                continue;
            }
            let s = self.score(agent, view, nx as usize, ny, dx);
            if best.is_none_or(|(bs, _, _)| s > bs) {
                best = Some((s, nx as usize, dx));
            }
        }
        let (_, nx, dx) = best.expect("the straight-up move is always in range");
        agent.x = nx;
        agent.y = ny;
        agent.bias = dx;
        agent.moves += 1;
        agent.crossings += self.mask.is_set(nx, ny) as usize;
        agent.trajectory.push((nx, ny));
    }

    fn retired(&self, agent: &Agent) -> bool {
        agent.y <= self.h_max || agent.moves >= self.params.max_steps
    }
}

/// Runs both agent populations for one frame.
///
/// The returned pheromone is `(1 - evaporation_rho) * prev` plus this
/// frame's deposits. Within a deployment agents advance in synchronous
/// rounds against pheromone frozen at the round start; deposits of agents
/// retiring in a round are summed per pixel in sorted order at the round
/// end, so agent order cannot change the result.
pub fn run_swarm(
    maps: &ConspicuityMaps,
    rgb: &RgbImage,
    mask: &ObstacleMask,
    appearance: &AppearanceModel,
    prev: &PheromonePair,
    params: &SwarmParams,
    h_max: usize,
) -> SwarmOutcome {
    run_swarm_ordered(maps, rgb, mask, appearance, prev, params, h_max, None)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn run_swarm_ordered(
    maps: &ConspicuityMaps,
    rgb: &RgbImage,
    mask: &ObstacleMask,
    appearance: &AppearanceModel,
    prev: &PheromonePair,
    params: &SwarmParams,
    h_max: usize,
    order: Option<&[usize]>,
) -> SwarmOutcome {
    let (w, h) = maps.intensity.dims();
    assert_eq!(rgb.dims(), (w, h), "rgb must be at detector resolution");
    assert_eq!((mask.width(), mask.height()), (w, h), "mask must be at detector resolution");

    let keep = 1.0 - params.evaporation_rho as f32;
    let mut maps_out = [prev.color.map(|&v| v * keep), prev.intensity.map(|&v| v * keep)];
    let ctx = Context {
        maps,
        runs: [RowRuns::new(&maps.color), RowRuns::new(&maps.intensity)],
        rgb,
        mask,
        appearance,
        params,
        h_max,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut records = Vec::new();
    let n = params.agents_per_map;

    for _ in 0..params.iterations {
        let mut agents: Vec<Agent> = Vec::with_capacity(2 * n);
        for population in [Population::Color, Population::Intensity] {
            for j in 0..n {
                let mut x = ((2 * j + 1) * w) / (2 * n);
                if params.spawn_jitter > 0 {
                    let off = rng.random_range(-(params.spawn_jitter as i64)..=params.spawn_jitter as i64);
                    x = (x as i64 + off).clamp(0, w as i64 - 1) as usize;
                }
                let y = h - 1;
                agents.push(Agent { population, x, y, moves: 0, crossings: 0, bias: 0, trajectory: vec![(x, y)] });
            }
        }
        if let Some(order) = order {
            let mut slots: Vec<Option<Agent>> = agents.into_iter().map(Some).collect();
            agents = order.iter().map(|&i| slots[i].take().expect("order is a permutation")).collect();
        }

        let mut active: Vec<Agent> = Vec::with_capacity(agents.len());
        for a in agents {
            if a.y <= h_max {
                records.push(AgentRecord {
                    population: a.population,
                    trajectory: a.trajectory,
                    moves: 0,
                    crossings: 0,
                    deposit: None,
                });
            } else {
                active.push(a);
            }
        }

        let mut views = [pheromone_view(&maps_out[0]), pheromone_view(&maps_out[1])];
        while !active.is_empty() {
            let mut pending: [Vec<(usize, f64)>; 2] = [Vec::new(), Vec::new()];
            let mut still = Vec::with_capacity(active.len());
            for mut a in active {
                let slot = Context::slot(a.population);
                ctx.step(&mut a, &views[slot]);
                if !ctx.retired(&a) {
                    still.push(a);
                    continue;
                }
                let f = pheromone_deposit(params.deposit_base, a.crossings, a.moves, params.deposit_mode);
                let laid = f.filter(|&f| f >= params.epsilon);
                if let Some(f) = laid {
                    stamp(&mut pending[slot], &a.trajectory[1..], params.deposit_radius, w, h, f);
                }
                records.push(AgentRecord {
                    population: a.population,
                    trajectory: a.trajectory,
                    moves: a.moves,
                    crossings: a.crossings,
                    deposit: laid,
                });
            }
            active = still;
            for slot in 0..2 {
                if pending[slot].is_empty() {
                    continue;
                }
                merge(&mut maps_out[slot], &mut pending[slot]);
                views[slot] = pheromone_view(&maps_out[slot]);
            }
        }
    }

    let [color, intensity] = maps_out;
    SwarmOutcome { pheromone: PheromonePair { color, intensity }, agents: records }
}

fn stamp(out: &mut Vec<(usize, f64)>, steps: &[(usize, usize)], r: usize, w: usize, h: usize, f: f64) {
    for &(x, y) in steps {
        for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
            for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                out.push((yy * w + xx, f));
            }
        }
    }
}

/// Adds per-pixel sums of the buffered deposits, summing each pixel's
/// contributions in ascending order.
fn merge(map: &mut Grid<f32>, pending: &mut [(usize, f64)]) {
    pending.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let data = map.data_mut();
    let mut i = 0;
    while i < pending.len() {
        let idx = pending[i].0;
        let mut sum = 0.0f64;
        while i < pending.len() && pending[i].0 == idx {
            sum += pending[i].1;
            i += 1;
        }
        data[idx] = (data[idx] as f64 + sum) as f32;
    }
}
