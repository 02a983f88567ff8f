//! Which ledger cell pays for a piece of packet work.

use crate::energy::{Constituent, SubCategory};
use crate::node::PacketClass;

/// How a node is involved with a packet when it pays energy for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Sender,
    Receiver,
    /// Per-packet processing work at any hop.
    Processor,
    /// Any repeat transmission of a unicast packet.
    Retransmitter,
    /// Sender or receiver of the start-of-run topology flood.
    TopologySetup,
    /// Reception destroyed by an overlapping transmission.
    CollidedReceiver,
    /// Header decode of a packet addressed to someone else.
    Overhearer,
    /// Discarding a data packet (queue overflow, no route, retry limit).
    Dropper,
}

impl Role {
    pub const ALL: [Role; 8] = [
        Role::Sender,
        Role::Receiver,
        Role::Processor,
        Role::Retransmitter,
        Role::TopologySetup,
        Role::CollidedReceiver,
        Role::Overhearer,
        Role::Dropper,
    ];
}

fn class_cell(class: PacketClass) -> SubCategory {
    match class {
        // acks only exist for sensed data and take its cell
        PacketClass::SensedData | PacketClass::Ack => SubCategory::Route,
        PacketClass::NeighborMonitor => SubCategory::Mon,
        PacketClass::Security => SubCategory::Sec,
        PacketClass::LocalControl => SubCategory::LocalProto,
        PacketClass::GlobalControl => SubCategory::GlobalProto,
        PacketClass::SinkControl => SubCategory::Snk,
    }
}

/// Total lookup from (class, role) to one ledger cell.
pub fn attribution(class: PacketClass, role: Role) -> (Constituent, SubCategory) {
    let sub = match role {
        Role::Sender | Role::Receiver => class_cell(class),
        Role::Processor => match class {
            PacketClass::SinkControl => SubCategory::Snk,
            _ => SubCategory::PacketProcessing,
        },
        Role::Retransmitter | Role::Dropper => SubCategory::PktLs,
        Role::TopologySetup => SubCategory::Topo,
        Role::CollidedReceiver => SubCategory::Coll,
        Role::Overhearer => SubCategory::Ohear,
    };
    (sub.constituent(), sub)
}
