//! The maze walker: an agent with four wall sensors and five actions (N, S, E, W, stay)
//! tries to stand on the goal cell after a fixed number of stages.
//!
//! Cells are addressed as `(row, col)` with row 0 at the north edge. Position variables
//! are `X_t` (column) and `Y_t` (row); stage `t` adds sensors `NS_t ES_t SS_t WS_t`, the
//! decision `A_t` and the next position `X_{t+1}`, `Y_{t+1}`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{DiagramBuilder, InfluenceDiagram, VarId, Variable};
use crate::policy::DecisionRule;

pub const ACTIONS: [&str; 5] = ["N", "S", "E", "W", "stay"];
pub const SENSOR_LABELS: [&str; 2] = ["wall", "clear"];
const SENSOR_PREFIX: [&str; 4] = ["NS", "ES", "SS", "WS"];

/// Sensor rows `[P(wall reading), P(clear reading)]`.
const PERFECT_WALL: [f64; 2] = [1.0, 0.0];
const PERFECT_OPEN: [f64; 2] = [0.0, 1.0];
const NOISY_WALL: [f64; 2] = [0.9, 0.1];
const NOISY_OPEN: [f64; 2] = [0.05, 0.95];

const MOVE_SUCCESS: f64 = 0.89;
const MOVE_STRAY: f64 = 0.021;

pub type Cell = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    North,
    South,
    East,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::East, Direction::South, Direction::West];

    fn from_action(a: usize) -> Option<Direction> {
        match a {
            0 => Some(Direction::North),
            1 => Some(Direction::South),
            2 => Some(Direction::East),
            3 => Some(Direction::West),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MazeSpec {
    rows: usize,
    cols: usize,
    open: Vec<bool>,
    goal: Cell,
}

impl MazeSpec {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn is_open(&self, (r, c): Cell) -> bool {
        r < self.rows && c < self.cols && self.open[r * self.cols + c]
    }

    /// The open cell one step away, if any; the perimeter is walled.
    pub fn neighbor(&self, (r, c): Cell, dir: Direction) -> Option<Cell> {
        let next = match dir {
            Direction::North => (r.checked_sub(1)?, c),
            Direction::South => (r + 1, c),
            Direction::East => (r, c + 1),
            Direction::West => (r, c.checked_sub(1)?),
        };
        self.is_open(next).then_some(next)
    }

    pub fn open_cells(&self) -> Vec<Cell> {
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| (r, c)))
            .filter(|&cell| self.is_open(cell))
            .collect()
    }

    /// Open cells other than the goal, row-major.
    pub fn start_cells(&self) -> Vec<Cell> {
        self.open_cells().into_iter().filter(|&c| c != self.goal).collect()
    }

    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(if (r, c) == self.goal {
                    'G'
                } else if self.is_open((r, c)) {
                    '.'
                } else {
                    '#'
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Parses `#` (obstacle), `.` (open) and `G` (goal). Blank lines are ignored.
pub fn parse_maze(text: &str) -> Result<MazeSpec> {
    let lines: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
    if lines.is_empty() {
        return Err(Error::Maze("empty maze".into()));
    }
    let cols = lines[0].chars().count();
    let mut open = Vec::with_capacity(cols * lines.len());
    let mut goal = None;
    for (r, line) in lines.iter().enumerate() {
        if line.chars().count() != cols {
            return Err(Error::Maze(format!(
                "row {} has {} cells, expected {cols}",
                r + 1,
                line.chars().count()
            )));
        }
        for (c, ch) in line.chars().enumerate() {
            match ch {
                '#' => open.push(false),
                '.' => open.push(true),
                'G' => {
                    if goal.replace((r, c)).is_some() {
                        return Err(Error::Maze("more than one goal `G`".into()));
                    }
                    open.push(true);
                }
                other => {
                    return Err(Error::Maze(format!(
                        "unknown character `{other}` at row {}, column {}",
                        r + 1,
                        c + 1
                    )))
                }
            }
        }
    }
    let goal = goal.ok_or_else(|| Error::Maze("no goal `G`".into()))?;
    let spec = MazeSpec {
        rows: lines.len(),
        cols,
        open,
        goal,
    };
    if spec.start_cells().is_empty() {
        return Err(Error::Maze("no open cell besides the goal".into()));
    }
    Ok(spec)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SensorModel {
    #[default]
    Perfect,
    Noisy,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ActuatorModel {
    #[default]
    Perfect,
    Noisy,
}

impl FromStr for SensorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(SensorModel::Perfect),
            "noisy" => Ok(SensorModel::Noisy),
            _ => Err(Error::Config(format!("unknown sensor model `{s}`"))),
        }
    }
}

impl FromStr for ActuatorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(ActuatorModel::Perfect),
            "noisy" => Ok(ActuatorModel::Noisy),
            _ => Err(Error::Config(format!("unknown actuator model `{s}`"))),
        }
    }
}

impl fmt::Display for SensorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensorModel::Perfect => "perfect",
            SensorModel::Noisy => "noisy",
        })
    }
}

impl fmt::Display for ActuatorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActuatorModel::Perfect => "perfect",
            ActuatorModel::Noisy => "noisy",
        })
    }
}

/// `[P(wall), P(clear)]` for a sensor facing `dir` from `cell`.
pub fn sensor_row(maze: &MazeSpec, cell: Cell, dir: Direction, model: SensorModel) -> [f64; 2] {
    let wall = maze.neighbor(cell, dir).is_none();
    match (model, wall) {
        (SensorModel::Perfect, true) => PERFECT_WALL,
        (SensorModel::Perfect, false) => PERFECT_OPEN,
        (SensorModel::Noisy, true) => NOISY_WALL,
        (SensorModel::Noisy, false) => NOISY_OPEN,
    }
}

/// Distribution over next cells; the current cell (stay) is always the last entry and
/// takes the residual so the row sums to exactly one.
pub fn actuator_row(maze: &MazeSpec, cell: Cell, action: usize, model: ActuatorModel) -> Vec<(Cell, f64)> {
    let Some(dir) = Direction::from_action(action) else {
        return vec![(cell, 1.0)];
    };
    let Some(target) = maze.neighbor(cell, dir) else {
        return vec![(cell, 1.0)];
    };
    match model {
        ActuatorModel::Perfect => vec![(target, 1.0), (cell, 0.0)],
        ActuatorModel::Noisy => {
            let strays: Vec<Cell> = Direction::ALL
                .iter()
                .filter(|&&d| d != dir)
                .filter_map(|&d| maze.neighbor(cell, d))
                .collect();
            let mut row = vec![(target, MOVE_SUCCESS)];
            let share = MOVE_STRAY / strays.len().max(1) as f64;
            for s in strays {
                row.push((s, share));
            }
            let used: f64 = row.iter().map(|&(_, p)| p).sum();
            row.push((cell, 1.0 - used));
            row
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MazeProblemConfig {
    pub maze: MazeSpec,
    pub stages: usize,
    pub sensor: SensorModel,
    pub actuator: ActuatorModel,
}

/// Contents of a maze config file (TOML). The maze path is relative to the file.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MazeConfigFile {
    pub maze: String,
    pub stages: usize,
    #[serde(default)]
    pub sensor: Option<String>,
    #[serde(default)]
    pub actuator: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl MazeConfigFile {
    pub fn load(path: &Path) -> Result<(MazeProblemConfig, Option<u64>)> {
        let text = std::fs::read_to_string(path)?;
        let file: MazeConfigFile = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let maze_path = path.parent().unwrap_or(Path::new(".")).join(&file.maze);
        let maze = parse_maze(&std::fs::read_to_string(maze_path)?)?;
        let config = MazeProblemConfig {
            maze,
            stages: file.stages,
            sensor: file.sensor.as_deref().map(str::parse).transpose()?.unwrap_or_default(),
            actuator: file
                .actuator
                .as_deref()
                .map(str::parse)
                .transpose()?
                .unwrap_or_default(),
        };
        Ok((config, file.seed))
    }
}

/// Variable ids of one stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageVars {
    pub x: VarId,
    pub y: VarId,
    /// North, east, south, west.
    pub sensors: [VarId; 4],
    pub action: VarId,
}

/// A generated maze diagram with the ids needed to simulate it.
#[derive(Clone, Debug)]
pub struct MazeProblem {
    pub config: MazeProblemConfig,
    pub diagram: InfluenceDiagram,
    pub stages: Vec<StageVars>,
    pub final_x: VarId,
    pub final_y: VarId,
}

fn residual_row(mut row: Vec<f64>) -> Vec<f64> {
    let (imax, _) = row.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc },
    );
    let others: f64 = row.iter().enumerate().filter(|&(i, _)| i != imax).map(|(_, p)| p).sum();
    row[imax] = 1.0 - others;
    row
}

fn encode_rows(maze: &MazeSpec) -> String {
    // `#` starts a comment in the diagram format.
    maze.to_ascii().trim_end().replace('#', "x").replace('\n', "/")
}

fn decode_rows(s: &str) -> String {
    s.replace('x', "#").replace('/', "\n")
}

impl MazeProblem {
    pub fn new(config: MazeProblemConfig) -> Result<Self> {
        if config.stages == 0 {
            return Err(Error::Config("a maze needs at least one stage".into()));
        }
        let maze = &config.maze;
        let (rows, cols) = (maze.rows(), maze.cols());
        let col_var = |name: String| Variable::new(name, (0..cols).map(|c| format!("c{c}")));
        let row_var = |name: String| Variable::new(name, (0..rows).map(|r| format!("r{r}")));
        let starts = maze.start_cells();

        let mut b = DiagramBuilder::new("maze");
        let px: Vec<f64> = (0..cols)
            .map(|c| starts.iter().filter(|s| s.1 == c).count() as f64 / starts.len() as f64)
            .collect();
        let mut x = b.chance(col_var("X_1".into()), &[], residual_row(px));
        let mut py = Vec::with_capacity(cols * rows);
        for c in 0..cols {
            let in_col: Vec<usize> = starts.iter().filter(|s| s.1 == c).map(|s| s.0).collect();
            let mut row = vec![0.0; rows];
            if in_col.is_empty() {
                row[0] = 1.0;
            } else {
                for &r in &in_col {
                    row[r] = 1.0 / in_col.len() as f64;
                }
            }
            py.extend(residual_row(row));
        }
        let mut y = b.chance(row_var("Y_1".into()), &[x], py);

        let mut stages = Vec::with_capacity(config.stages);
        let mut observed: Vec<VarId> = Vec::new();
        for t in 1..=config.stages {
            let mut sensors = [0; 4];
            for (i, dir) in Direction::ALL.iter().enumerate() {
                let mut cpt = Vec::with_capacity(cols * rows * 2);
                for c in 0..cols {
                    for r in 0..rows {
                        let row = if maze.is_open((r, c)) {
                            sensor_row(maze, (r, c), *dir, config.sensor)
                        } else {
                            PERFECT_WALL
                        };
                        cpt.extend_from_slice(&row);
                    }
                }
                sensors[i] = b.chance(
                    Variable::new(format!("{}_{t}", SENSOR_PREFIX[i]), SENSOR_LABELS),
                    &[x, y],
                    cpt,
                );
                observed.push(sensors[i]);
            }
            let a = b.decision(Variable::new(format!("A_{t}"), ACTIONS), &observed);
            observed.push(a);

            let mut cpt_x = Vec::new();
            let mut cpt_y = Vec::new();
            for c in 0..cols {
                for r in 0..rows {
                    for act in 0..ACTIONS.len() {
                        let moves = if maze.is_open((r, c)) {
                            actuator_row(maze, (r, c), act, config.actuator)
                        } else {
                            vec![((r, c), 1.0)]
                        };
                        let mut px = vec![0.0; cols];
                        for &((_, nc), p) in &moves {
                            px[nc] += p;
                        }
                        cpt_x.extend(residual_row(px.clone()));
                        for (nc, &mass) in px.iter().enumerate() {
                            let mut row = vec![0.0; rows];
                            if mass > 0.0 {
                                for &((nr, mc), p) in &moves {
                                    if mc == nc {
                                        row[nr] += p / mass;
                                    }
                                }
                            } else {
                                row[r] = 1.0;
                            }
                            cpt_y.extend(residual_row(row));
                        }
                    }
                }
            }
            let nx = b.chance(col_var(format!("X_{}", t + 1)), &[x, y, a], cpt_x);
            let ny = b.chance(row_var(format!("Y_{}", t + 1)), &[x, y, a, nx], cpt_y);
            stages.push(StageVars {
                x,
                y,
                sensors,
                action: a,
            });
            x = nx;
            y = ny;
        }
        let (gr, gc) = maze.goal();
        let mut values = Vec::with_capacity(cols * rows);
        for c in 0..cols {
            for r in 0..rows {
                values.push(if (r, c) == (gr, gc) { 1.0 } else { 0.0 });
            }
        }
        b.value("V", &[x, y], values);

        let mut meta = BTreeMap::new();
        meta.insert("maze".to_owned(), encode_rows(maze));
        meta.insert("stages".to_owned(), config.stages.to_string());
        meta.insert("sensor".to_owned(), config.sensor.to_string());
        meta.insert("actuator".to_owned(), config.actuator.to_string());
        let diagram = b.build().with_metadata(meta);
        Ok(MazeProblem {
            config,
            diagram,
            stages,
            final_x: x,
            final_y: y,
        })
    }

    /// Rebuilds the problem from a generated diagram's metadata.
    pub fn from_diagram(d: &InfluenceDiagram) -> Result<Self> {
        let meta = d.metadata();
        let get = |k: &str| {
            meta.get(k)
                .ok_or_else(|| Error::Config(format!("diagram has no `meta.{k}`; not a maze diagram")))
        };
        let maze = parse_maze(&decode_rows(get("maze")?))?;
        let stages = get("stages")?
            .parse()
            .map_err(|_| Error::Config("meta.stages is not a number".into()))?;
        let config = MazeProblemConfig {
            maze,
            stages,
            sensor: get("sensor")?.parse()?,
            actuator: get("actuator")?.parse()?,
        };
        let problem = MazeProblem::new(config)?;
        if problem.diagram.nodes() != d.nodes() {
            return Err(Error::Config("diagram does not match its maze metadata".into()));
        }
        Ok(problem)
    }
}

pub fn build_maze_id(config: &MazeProblemConfig) -> Result<InfluenceDiagram> {
    Ok(MazeProblem::new(config.clone())?.diagram)
}

fn sample(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Monte-Carlo success rate of `rule` and its binomial standard error.
pub fn simulate_policy(problem: &MazeProblem, rule: &dyn DecisionRule, episodes: u64, seed: u64) -> Result<(f64, f64)> {
    if episodes == 0 {
        return Err(Error::NoEpisodes);
    }
    let maze = &problem.config.maze;
    let starts = maze.start_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0usize; problem.diagram.len()];
    let mut successes = 0u64;
    for _ in 0..episodes {
        let mut cell = starts[rng.gen_range(0..starts.len())];
        for (k, stage) in problem.stages.iter().enumerate() {
            assign[stage.x] = cell.1;
            assign[stage.y] = cell.0;
            for (i, dir) in Direction::ALL.iter().enumerate() {
                assign[stage.sensors[i]] = sample(&mut rng, &sensor_row(maze, cell, *dir, problem.config.sensor));
            }
            let dist = rule.distribution(k, &|v| assign[v]);
            let a = sample(&mut rng, &dist);
            assign[stage.action] = a;
            let moves = actuator_row(maze, cell, a, problem.config.actuator);
            let probs: Vec<f64> = moves.iter().map(|&(_, p)| p).collect();
            cell = moves[sample(&mut rng, &probs)].0;
        }
        if cell == maze.goal() {
            successes += 1;
        }
    }
    let mean = successes as f64 / episodes as f64;
    let stderr = (mean * (1.0 - mean) / episodes as f64).sqrt();
    Ok((mean, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::evaluate_rule_exact;
    use crate::format::{parse_diagram, serialize_diagram};

    const CORRIDOR: &str = "..\n.G\n";

    fn config(text: &str, stages: usize, sensor: SensorModel, actuator: ActuatorModel) -> MazeProblemConfig {
        MazeProblemConfig {
            maze: parse_maze(text).unwrap(),
            stages,
            sensor,
            actuator,
        }
    }

    #[test]
    fn parse_examples() {
        let m = parse_maze("G.").unwrap();
        assert_eq!((m.rows(), m.cols(), m.goal()), (1, 2, (0, 0)));
        assert!(matches!(parse_maze("G.\n.G"), Err(Error::Maze(_))));
        assert!(matches!(parse_maze("..\n..."), Err(Error::Maze(_))));
        assert!(matches!(parse_maze(".\n?G"), Err(Error::Maze(_))));
        assert!(matches!(parse_maze("G"), Err(Error::Maze(_))));
        let m = parse_maze("...\n...\n..G").unwrap();
        assert_eq!(m.open_cells().len(), 9);
        assert_eq!(m.start_cells().len(), 8);
    }

    #[test]
    fn actuator_rows() {
        // Open corridor cell with one other open neighbour.
        let m = parse_maze("...\n#G#").unwrap();
        let row = actuator_row(&m, (0, 1), 3, ActuatorModel::Noisy);
        assert_eq!(row[0], ((0, 0), 0.89));
        let others: Vec<_> = row[1..row.len() - 1].to_vec();
        assert_eq!(others.len(), 2);
        // Moving west from the middle of a walled corridor: all stray mass goes east.
        let m2 = parse_maze("...\n###\nG..").unwrap();
        let row = actuator_row(&m2, (0, 1), 3, ActuatorModel::Noisy);
        assert_eq!(
            row,
            vec![((0, 0), 0.89), ((0, 2), 0.021), ((0, 1), 1.0 - (0.89 + 0.021))]
        );
        assert!((row[2].1 - 0.089).abs() < 1e-15);
        assert_eq!(
            actuator_row(&m2, (0, 0), 0, ActuatorModel::Perfect),
            vec![((0, 0), 1.0)]
        );
        assert_eq!(actuator_row(&m2, (0, 0), 4, ActuatorModel::Noisy), vec![((0, 0), 1.0)]);
        for a in 0..5 {
            for cell in m.open_cells() {
                let s: f64 = actuator_row(&m, cell, a, ActuatorModel::Noisy)
                    .iter()
                    .map(|x| x.1)
                    .sum();
                assert_eq!(s, 1.0);
            }
        }
    }

    #[test]
    fn sensor_semantics() {
        let m = parse_maze(CORRIDOR).unwrap();
        assert_eq!(
            sensor_row(&m, (0, 0), Direction::North, SensorModel::Perfect),
            [1.0, 0.0]
        );
        assert_eq!(
            sensor_row(&m, (0, 0), Direction::South, SensorModel::Perfect),
            [0.0, 1.0]
        );
        assert_eq!(sensor_row(&m, (0, 0), Direction::North, SensorModel::Noisy), [0.9, 0.1]);
        assert_eq!(
            sensor_row(&m, (0, 0), Direction::East, SensorModel::Noisy),
            [0.05, 0.95]
        );
    }

    #[test]
    fn ten_stages_give_49_predecessors() {
        let p = MazeProblem::new(config(CORRIDOR, 10, SensorModel::Perfect, ActuatorModel::Perfect)).unwrap();
        assert_eq!(p.diagram.information_predecessors(9).unwrap().len(), 49);
        assert!(p.diagram.validate().is_ok());
        for k in 1..10 {
            let prev = p.diagram.information_predecessors(k - 1).unwrap();
            let cur = p.diagram.information_predecessors(k).unwrap();
            assert!(prev.iter().all(|v| cur.contains(v)));
            assert!(cur.contains(&p.stages[k - 1].action));
        }
    }

    #[test]
    fn step_toward_goal_is_certain() {
        let mut b = String::from(".G\n");
        b.push_str("##\n");
        let p = MazeProblem::new(config(&b, 1, SensorModel::Perfect, ActuatorModel::Perfect)).unwrap();
        struct East;
        impl DecisionRule for East {
            fn distribution(&self, _: usize, _: &dyn Fn(VarId) -> usize) -> Vec<f64> {
                vec![0.0, 0.0, 1.0, 0.0, 0.0]
            }
        }
        assert!((evaluate_rule_exact(&p.diagram, &East).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(simulate_policy(&p, &East, 1000, 3).unwrap(), (1.0, 0.0));
        assert!(matches!(simulate_policy(&p, &East, 0, 3), Err(Error::NoEpisodes)));
    }

    #[test]
    fn noisy_round_trip_and_metadata() {
        let p = MazeProblem::new(config("..#\n..G\n", 2, SensorModel::Noisy, ActuatorModel::Noisy)).unwrap();
        assert!(p.diagram.validate().is_ok());
        let text = serialize_diagram(&p.diagram);
        assert!(text.contains("0.9 0.1") && text.contains("0.05 0.95"));
        let back = parse_diagram(&text).unwrap();
        assert_eq!(back.nodes(), p.diagram.nodes());
        let again = MazeProblem::from_diagram(&back).unwrap();
        assert_eq!(again.config, p.config);
    }
}
