//! Names, the four packet types and their TLV codec.

pub mod codec;
mod name;
mod packet;

pub use codec::{decode_packet, encode_packet, EncodeError, MalformedError};
pub use name::{is_prefix_of, Name, NameError, MAX_COMPONENTS, MAX_COMPONENT_LEN, TOPIC_QUERY_MARKER};
pub use packet::{Data, Interest, Nam, Packet, Pam, SOLICIT_RANK};
