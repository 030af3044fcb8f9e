use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SpiceError};
use crate::evidence::{Context, LabelledContext, Transition};
use crate::seed;

pub const NUM_ACTIONS: usize = 5;
pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;
pub const STAY: usize = 4;

/// Grid cell `(x, y)`.
pub type Cell = (usize, usize);

pub fn cell_state(cell: Cell) -> Vec<f64> {
    vec![cell.0 as f64, cell.1 as f64]
}

pub fn state_cell(state: &[f64], size: usize) -> Result<Cell> {
    if state.len() != 2 {
        return Err(SpiceError::DimensionMismatch {
            expected: 2,
            got: state.len(),
        });
    }
    let (x, y) = (state[0], state[1]);
    let on_grid = |v: f64| v >= 0.0 && v.fract() == 0.0 && (v as usize) < size;
    if !on_grid(x) || !on_grid(y) {
        return Err(invalid(format!("state ({x}, {y}) is off the {size}x{size} grid")));
    }
    Ok((x as usize, y as usize))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    HeldOut,
}

/// Deterministic `size × size` gridworld with a hidden goal. The episode
/// runs the full horizon; the goal pays 1 on every step that lands on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DarkroomTask {
    pub size: usize,
    pub goal: Cell,
    pub horizon: usize,
    pub split: Split,
    pub start: Cell,
}

impl DarkroomTask {
    pub fn new(size: usize, goal: Cell, horizon: usize, split: Split, start: Cell) -> Result<Self> {
        if size == 0 || goal.0 >= size || goal.1 >= size || start.0 >= size || start.1 >= size {
            return Err(invalid("goal and start must lie on a non-empty grid"));
        }
        Ok(Self {
            size,
            goal,
            horizon,
            split,
            start,
        })
    }

    /// Number of steps on a shortest path from `from` to the goal.
    pub fn distance(&self, from: Cell) -> usize {
        from.0.abs_diff(self.goal.0) + from.1.abs_diff(self.goal.1)
    }
}

/// Clamped move; `up` increases `y`.
pub fn move_cell(size: usize, cell: Cell, action: usize) -> Result<Cell> {
    let (x, y) = cell;
    Ok(match action {
        UP => (x, (y + 1).min(size - 1)),
        DOWN => (x, y.saturating_sub(1)),
        LEFT => (x.saturating_sub(1), y),
        RIGHT => ((x + 1).min(size - 1), y),
        STAY => (x, y),
        _ => {
            return Err(SpiceError::ActionOutOfRange {
                action,
                num_actions: NUM_ACTIONS,
            })
        }
    })
}

/// `(next cell, 1[next cell = goal])`.
pub fn darkroom_step(task: &DarkroomTask, cell: Cell, action: usize) -> Result<(Cell, f64)> {
    if cell.0 >= task.size || cell.1 >= task.size {
        return Err(invalid(format!("cell {cell:?} is off the grid")));
    }
    let next = move_cell(task.size, cell, action)?;
    Ok((next, if next == task.goal { 1.0 } else { 0.0 }))
}

/// Best one-step reward available from `cell`.
pub fn optimal_action_reward(task: &DarkroomTask, cell: Cell) -> Result<f64> {
    let mut best: f64 = 0.0;
    for a in 0..NUM_ACTIONS {
        best = best.max(darkroom_step(task, cell, a)?.1);
    }
    Ok(best)
}

/// A shortest-path action towards the goal (`stay` at the goal).
pub fn greedy_action(task: &DarkroomTask, cell: Cell) -> usize {
    let (x, y) = cell;
    let (gx, gy) = task.goal;
    if x < gx {
        RIGHT
    } else if x > gx {
        LEFT
    } else if y < gy {
        UP
    } else if y > gy {
        DOWN
    } else {
        STAY
    }
}

/// Shuffle all cells and split 80/20 into training and held-out goals.
pub fn darkroom_split(seed: u64, size: usize) -> (Vec<Cell>, Vec<Cell>) {
    let mut cells: Vec<Cell> = (0..size).flat_map(|x| (0..size).map(move |y| (x, y))).collect();
    cells.shuffle(&mut seed::rng(seed));
    let n_train = (cells.len() * 4 + 2) / 5;
    let held_out = cells.split_off(n_train);
    (cells, held_out)
}

/// Goals, splits and start states for one Darkroom study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkroomManifest {
    pub seed: u64,
    pub size: usize,
    pub horizon: usize,
    pub train: Vec<DarkroomTask>,
    pub held_out: Vec<DarkroomTask>,
}

impl DarkroomManifest {
    /// Each task gets one seeded start cell shared by every agent.
    pub fn generate(seed: u64, size: usize, horizon: usize) -> Result<Self> {
        let (train_goals, held_goals) = darkroom_split(seed, size);
        let make = |goals: Vec<Cell>, split: Split, stream: u64| -> Result<Vec<DarkroomTask>> {
            goals
                .into_iter()
                .enumerate()
                .map(|(i, goal)| {
                    let mut rng = seed::rng(seed::task_seed(seed, stream, i as u64));
                    let start = (rng.random_range(0..size), rng.random_range(0..size));
                    DarkroomTask::new(size, goal, horizon, split, start)
                })
                .collect()
        };
        Ok(Self {
            seed,
            size,
            horizon,
            train: make(train_goals, Split::Train, 1)?,
            held_out: make(held_goals, Split::HeldOut, 2)?,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Uniform-random rollouts of `horizon` steps from uniform start cells, one
/// context per episode, labelled with the context's last action.
pub fn gen_darkroom_dataset<R: Rng + ?Sized>(
    tasks: &[DarkroomTask],
    episodes_per_task: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<LabelledContext>> {
    if horizon == 0 {
        return Err(invalid("darkroom contexts need at least one step so the label exists"));
    }
    let mut out = Vec::with_capacity(tasks.len() * episodes_per_task);
    for task in tasks {
        for _ in 0..episodes_per_task {
            let mut cell = (rng.random_range(0..task.size), rng.random_range(0..task.size));
            let mut ctx = Context::new();
            for step in 0..horizon {
                let a = rng.random_range(0..NUM_ACTIONS);
                let (next, r) = darkroom_step(task, cell, a)?;
                ctx.push(Transition::new(cell_state(cell), a, r, cell_state(next), step + 1 == horizon));
                cell = next;
            }
            let label = ctx.last().expect("horizon >= 1").action;
            let query = cell_state((rng.random_range(0..task.size), rng.random_range(0..task.size)));
            out.push(LabelledContext {
                context: ctx,
                query,
                label,
                behaviour_prob: 1.0 / NUM_ACTIONS as f64,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashSet, VecDeque};

    fn task(goal: Cell) -> DarkroomTask {
        DarkroomTask::new(10, goal, 100, Split::HeldOut, (0, 0)).unwrap()
    }

    fn bfs_distance(t: &DarkroomTask, from: Cell) -> usize {
        let mut seen = HashSet::from([from]);
        let mut queue = VecDeque::from([(from, 0)]);
        while let Some((c, d)) = queue.pop_front() {
            if c == t.goal {
                return d;
            }
            for a in 0..NUM_ACTIONS {
                let n = move_cell(t.size, c, a).unwrap();
                if seen.insert(n) {
                    queue.push_back((n, d + 1));
                }
            }
        }
        unreachable!()
    }

    #[test]
    fn walls_clamp() {
        let t = task((5, 5));
        assert_eq!(darkroom_step(&t, (0, 0), LEFT).unwrap(), ((0, 0), 0.0));
        assert_eq!(darkroom_step(&t, (0, 0), DOWN).unwrap(), ((0, 0), 0.0));
        assert_eq!(darkroom_step(&t, (9, 9), UP).unwrap().0, (9, 9));
        assert_eq!(darkroom_step(&t, (9, 9), RIGHT).unwrap().0, (9, 9));
        assert_eq!(darkroom_step(&t, (3, 3), UP).unwrap().0, (3, 4));
        assert!(darkroom_step(&t, (0, 0), 5).is_err());
    }

    #[test]
    fn goal_pays_on_stay() {
        let t = task((4, 4));
        assert_eq!(darkroom_step(&t, (4, 4), STAY).unwrap(), ((4, 4), 1.0));
    }

    #[test]
    fn greedy_rollout_first_reward_at_manhattan_distance() {
        let t = task((3, 4));
        let mut cell = (0, 0);
        let mut first = None;
        for step in 1..=20 {
            let (next, r) = darkroom_step(&t, cell, greedy_action(&t, cell)).unwrap();
            cell = next;
            if r > 0.0 && first.is_none() {
                first = Some(step);
            }
        }
        assert_eq!(first, Some(bfs_distance(&t, (0, 0))));
        assert_eq!(first, Some(7));
    }

    #[test]
    fn manhattan_matches_bfs_everywhere() {
        let t = task((6, 2));
        for x in 0..10 {
            for y in 0..10 {
                assert_eq!(t.distance((x, y)), bfs_distance(&t, (x, y)));
            }
        }
    }

    #[test]
    fn optimal_reward_cases() {
        let t = task((5, 5));
        assert_eq!(optimal_action_reward(&t, (5, 4)).unwrap(), 1.0);
        assert_eq!(optimal_action_reward(&t, (5, 5)).unwrap(), 1.0);
        assert_eq!(optimal_action_reward(&t, (4, 4)).unwrap(), 0.0);
        assert_eq!(optimal_action_reward(&t, (0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn split_partitions_grid() {
        let (train, held) = darkroom_split(7, 10);
        assert_eq!((train.len(), held.len()), (80, 20));
        let all: HashSet<Cell> = train.iter().chain(&held).copied().collect();
        assert_eq!(all.len(), 100);
        assert_eq!(darkroom_split(7, 10), (train, held));
        assert_ne!(darkroom_split(8, 10).1, darkroom_split(7, 10).1);
        let (t5, h5) = darkroom_split(1, 5);
        assert_eq!((t5.len(), h5.len()), (20, 5));
    }

    #[test]
    fn transitions_are_deterministic() {
        let t = task((2, 7));
        for x in 0..10 {
            for y in 0..10 {
                for a in 0..NUM_ACTIONS {
                    assert_eq!(darkroom_step(&t, (x, y), a).unwrap(), darkroom_step(&t, (x, y), a).unwrap());
                }
            }
        }
    }

    #[test]
    fn dataset_uses_weak_last_labels_and_uniform_actions() {
        let m = DarkroomManifest::generate(3, 10, 100).unwrap();
        let data = gen_darkroom_dataset(&m.train, 5, 50, &mut seed::rng(4)).unwrap();
        assert_eq!(data.len(), 400);
        let mut counts = [0.0; NUM_ACTIONS];
        for s in &data {
            assert_eq!(s.label, s.context.last().unwrap().action);
            assert_eq!(s.behaviour_prob, 0.2);
            for tr in &s.context {
                counts[tr.action] += 1.0;
            }
        }
        let n: f64 = counts.iter().sum();
        let chi: f64 = counts.iter().map(|c| (c - n / 5.0).powi(2) / (n / 5.0)).sum();
        assert!(chi < 18.47);
        assert!(gen_darkroom_dataset(&m.train, 1, 0, &mut seed::rng(4)).is_err());
    }

    #[test]
    fn golden_dataset_fragment() {
        let m = DarkroomManifest::generate(11, 10, 100).unwrap();
        let data = gen_darkroom_dataset(&m.train[..1], 1, 6, &mut seed::rng(12)).unwrap();
        let fragment: Vec<(usize, usize, usize, f64)> = data[0]
            .context
            .iter()
            .map(|t| (t.state[0] as usize, t.state[1] as usize, t.action, t.reward))
            .collect();
        let golden = vec![(0, 0, 4, 0.0), (0, 0, 3, 0.0), (1, 0, 3, 0.0), (2, 0, 3, 0.0), (3, 0, 4, 0.0), (3, 0, 1, 0.0)];
        assert_eq!(fragment, golden);
        assert_eq!(m.train[0].goal, (5, 1));
    }

    #[test]
    fn manifest_round_trip_and_fixed_starts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let m = DarkroomManifest::generate(5, 10, 100).unwrap();
        assert_eq!(m, DarkroomManifest::generate(5, 10, 100).unwrap());
        m.save_json(&path).unwrap();
        assert_eq!(DarkroomManifest::load_json(&path).unwrap(), m);
        assert_eq!(m.held_out.len(), 20);
        assert!(m.held_out.iter().all(|t| t.split == Split::HeldOut));
    }

    #[test]
    fn state_round_trip() {
        assert_eq!(state_cell(&cell_state((3, 9)), 10).unwrap(), (3, 9));
        assert!(state_cell(&[10.0, 0.0], 10).is_err());
        assert!(state_cell(&[1.5, 0.0], 10).is_err());
    }
}
