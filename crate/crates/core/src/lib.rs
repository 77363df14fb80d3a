//! Discrete-event simulation of heralded entanglement between two absorptive
//! quantum memories, with photonic states held as truncated Fock-space
//! density matrices.

pub mod analysis;
pub mod config;
pub mod des;
pub mod experiments;
pub mod fock;
pub mod hardware;
pub mod protocol;
pub mod state_manager;

pub use analysis::{AnalysisError, BellSign, EffectiveState};
pub use config::{load_config, ConfigError, ExperimentConfig};
pub use des::{SimError, Time};
pub use experiments::ExperimentError;
pub use fock::{Complex64, DensityMatrix, FockError, FockSpace, Ket, Matrix};
pub use hardware::{Herald, QsdMode, ReemissionOrder};
pub use protocol::{run_cycle, Analyser, ProtocolError, Topology, TrialRecord};
