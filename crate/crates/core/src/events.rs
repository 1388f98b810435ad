use serde_json::{json, Value};

/// Machine-readable event stream on stderr, one JSON object per line.
#[derive(Debug, Clone, Copy, Default)]
pub struct EventLog {
    pub enabled: bool,
}

impl EventLog {
    pub fn json() -> Self {
        EventLog { enabled: true }
    }

    pub fn emit(&self, event: &str, fields: Value) {
        if !self.enabled {
            return;
        }
        let mut obj = json!({ "event": event });
        if let (Some(map), Value::Object(extra)) = (obj.as_object_mut(), fields) {
            map.extend(extra);
        }
        eprintln!("{obj}");
    }
}
