//! Offline chat backends.
//!
//! * [`CannedBackend`] returns the same text for every prompt.
//! * [`ScriptedBackend`] looks responses up by [`prompt_hash`].
//! * [`HeuristicBackend`] reads the rendered prompt back and answers from
//!   keyword cues: objects named in the action history or conversation rank
//!   A, objects named in the location description rank B, everything else D.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::{ChatBackend, LlmError};

/// FNV-1a 64 of the prompt bytes, as 16 lowercase hex digits.
pub fn prompt_hash(prompt: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in prompt.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

pub struct CannedBackend {
    text: String,
}

impl CannedBackend {
    pub fn new(text: impl Into<String>) -> Self {
        CannedBackend { text: text.into() }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        fs::read_to_string(path)
            .map(Self::new)
            .map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))
    }
}

impl ChatBackend for CannedBackend {
    fn complete(&self, _prompt: &str) -> Result<String, LlmError> {
        Ok(self.text.clone())
    }
}

/// Responses keyed by prompt hash. Unknown prompts are a protocol error.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    responses: BTreeMap<String, String>,
}

impl ScriptedBackend {
    pub fn new(responses: BTreeMap<String, String>) -> Self {
        ScriptedBackend { responses }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
        let responses: BTreeMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| LlmError::Config(format!("response script {}: {e}", path.display())))?;
        if let Some(bad) = responses
            .keys()
            .find(|k| k.len() != 16 || !k.chars().all(|c| c.is_ascii_hexdigit()))
        {
            return Err(LlmError::Config(format!("response script key `{bad}` is not 16 hex digits")));
        }
        Ok(Self::new(responses.into_iter().map(|(k, v)| (k.to_lowercase(), v)).collect()))
    }

    pub fn insert(&mut self, prompt: &str, response: impl Into<String>) {
        self.responses.insert(prompt_hash(prompt), response.into());
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let key = prompt_hash(prompt);
        self.responses
            .get(&key)
            .cloned()
            .ok_or_else(|| LlmError::Protocol(format!("no scripted response for prompt hash {key}")))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicBackend;

/// Sections recovered from a rendered prompt.
#[derive(Debug, Default)]
struct Parsed {
    location: String,
    history: Vec<String>,
    conversation: Vec<String>,
    objects: Vec<String>,
    target: Option<String>,
    predicted: Option<String>,
    ground_truth: Option<String>,
}

fn parse_prompt(prompt: &str) -> Parsed {
    #[derive(PartialEq)]
    enum Section {
        Other,
        History,
        Conversation,
        Objects,
    }
    let mut p = Parsed::default();
    let mut section = Section::Other;
    for line in prompt.lines() {
        if let Some(v) = line.strip_prefix("Current location: ") {
            p.location = v.to_string();
            continue;
        }
        if let Some(v) = line.strip_prefix("Predicted action: ") {
            p.predicted = Some(v.to_string());
            continue;
        }
        if let Some(v) = line.strip_prefix("Ground-truth action: ") {
            p.ground_truth = Some(v.to_string());
            continue;
        }
        if let Some(v) = line.strip_prefix("The person is walking to the ") {
            p.target = Some(v.trim_end_matches('.').to_string());
            continue;
        }
        match line {
            "Action history:" => section = Section::History,
            "Conversation:" => section = Section::Conversation,
            "## Objects in the room" => section = Section::Objects,
            l if l.starts_with("## ") => section = Section::Other,
            l => {
                if let Some(item) = l.strip_prefix("- ") {
                    match section {
                        Section::History => p.history.push(item.to_string()),
                        Section::Conversation => p.conversation.push(item.to_string()),
                        Section::Objects => p.objects.push(item.to_string()),
                        Section::Other => {}
                    }
                }
            }
        }
    }
    p
}

/// Whole-word, case-insensitive containment.
fn mentions(text: &str, label: &str) -> bool {
    let text = text.to_lowercase();
    let label = label.to_lowercase();
    let is_word = |c: char| c.is_alphanumeric();
    text.match_indices(&label).any(|(i, m)| {
        let before = text[..i].chars().next_back();
        let after = text[i + m.len()..].chars().next();
        !before.is_some_and(is_word) && !after.is_some_and(is_word)
    })
}

const STOPWORDS: &[&str] = &[
    "at", "on", "in", "to", "of", "up", "is", "it", "an", "the", "and", "for", "with", "from", "into", "onto", "some", "her", "his", "their", "them", "then", "will",
    "out", "off", "down", "person", "goes", "walks",
];

fn content_words(s: &str) -> BTreeSet<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| w.len() >= 2 && !STOPWORDS.contains(w))
        .map(str::to_string)
        .collect()
}

/// Typical action at a household object.
pub fn typical_action(object: &str) -> String {
    let verb = match object {
        "sink" => "wash hands at the",
        "fridge" => "take a drink out of the",
        "stove" => "cook breakfast on the",
        "microwave" => "heat up leftovers in the",
        "coffee maker" => "brew a cup of coffee with the",
        "dining table" => "sit down to eat at the",
        "sofa" => "sit down and relax on the",
        "tv" => "turn on the",
        "bed" => "lie down to sleep in the",
        "desk" => "sit down to work at the",
        "bookshelf" => "pick a book from the",
        "washing machine" => "load dirty laundry into the",
        "wardrobe" => "take clothes out of the",
        "toilet" => "use the",
        "bathtub" => "take a bath in the",
        "plant" => "water the",
        "shoe rack" => "put on shoes at the",
        "piano" => "practice playing the",
        "lamp" => "switch on the",
        "mirror" => "check appearance in the",
        "dishwasher" => "unload clean dishes from the",
        "armchair" => "sit in the",
        "printer" => "collect printed pages from the",
        "cabinet" => "take something out of the",
        _ => "use the",
    };
    format!("{verb} {object}")
}

impl HeuristicBackend {
    fn ranks(&self, p: &Parsed) -> BTreeMap<String, char> {
        let strong: Vec<&String> = p.history.iter().chain(&p.conversation).collect();
        p.objects
            .iter()
            .map(|o| {
                let rank = if strong.iter().any(|t| mentions(t, o)) {
                    'A'
                } else if mentions(&p.location, o) {
                    'B'
                } else {
                    'D'
                };
                (o.clone(), rank)
            })
            .collect()
    }
}

impl ChatBackend for HeuristicBackend {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let p = parse_prompt(prompt);
        if let (Some(pred), Some(gt)) = (&p.predicted, &p.ground_truth) {
            let (a, b) = (content_words(pred), content_words(gt));
            let shared = a.intersection(&b).count();
            let denom = a.len().min(b.len()).max(1);
            return Ok(if 2 * shared >= denom { "1" } else { "0" }.to_string());
        }
        if let Some(target) = &p.target {
            return Ok(format!("The person will {}.", typical_action(target)));
        }
        if p.objects.is_empty() {
            return Err(LlmError::Protocol("heuristic backend could not find an object list in the prompt".into()));
        }
        let ranks = self.ranks(&p);
        if prompt.contains("## Candidate targets from the previous step") {
            return Ok(p
                .objects
                .iter()
                .map(|o| format!("{o}: {}", ranks[o]))
                .collect::<Vec<_>>()
                .join("\n"));
        }
        let picks: Vec<String> = p
            .objects
            .iter()
            .filter(|o| ranks[*o] != 'D')
            .map(|o| format!("{o} - {}", typical_action(o)))
            .collect();
        Ok(if picks.is_empty() {
            "No object stands out from the context.".to_string()
        } else {
            picks.join("\n")
        })
    }
}
