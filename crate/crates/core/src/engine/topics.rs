use std::collections::BTreeMap;

use crate::ndn::codec::{HEADER_LEN, MAX_PACKET_LEN};
use crate::ndn::{Data, Name};

/// Topic → content names, kept by a content proxy in arrival order.
#[derive(Debug, Clone, Default)]
pub struct TopicIndex {
    topics: BTreeMap<Name, Vec<Name>>,
}

impl TopicIndex {
    pub fn add(&mut self, topic: Name, name: Name) {
        let names = self.topics.entry(topic).or_default();
        if !names.contains(&name) {
            names.push(name);
        }
    }

    pub fn names(&self, topic: &Name) -> &[Name] {
        self.topics.get(topic).map(Vec::as_slice).unwrap_or_default()
    }

    /// Reply to the topic query `query`: empty payload and the newest
    /// names that fit in one packet.
    pub fn reply(&self, query: &Name, topic: &Name) -> Data {
        // Fixed Data body: name, payload_len(2), topics_count(1), names_count(1).
        let mut size = HEADER_LEN + query.encoded_len() + 2 + 1 + 1;
        let mut meta_names = Vec::new();
        for name in self.names(topic).iter().rev() {
            let len = name.encoded_len();
            if size + len > MAX_PACKET_LEN || meta_names.len() == u8::MAX as usize {
                break;
            }
            size += len;
            meta_names.push(name.clone());
        }
        Data {
            name: query.clone(),
            payload: Vec::new(),
            meta_topics: Vec::new(),
            meta_names,
        }
    }
}
