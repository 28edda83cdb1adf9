//! Benchmark diagram generators.

pub mod maze;
pub mod parity;
pub mod random;

pub use maze::{
    actuator_row, build_maze_id, parse_maze, simulate_policy, ActuatorModel, MazeProblem, MazeProblemConfig, MazeSpec,
    SensorModel,
};
pub use parity::build_parity_id;
