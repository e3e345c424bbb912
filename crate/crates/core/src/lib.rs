pub mod cli;
pub mod config;
pub mod detect;
pub mod kinematics;
pub mod leveling;
pub mod mission;
pub mod report;
pub mod sim;
