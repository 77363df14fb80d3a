//! Device models and the timeline entities built from them.

mod devices;
mod nodes;

pub use devices::{
    AfcMemory, BsmStation, ClassicalChannel, FiberChannel, Herald, Qsd, QsdMode, ReemissionOrder,
    SpdcSource, Spd, SPEED_OF_LIGHT,
};
pub use nodes::{
    BsmNode, BsmRecord, FiberNode, HeraldLog, MemoryNode, Message, Photon, QsdNode, SinkNode,
    SourceNode,
};
