use super::{Fragment, FragmentKind};

pub const RING_MIN: usize = 3;
pub const RING_MAX: usize = 8;
pub const PATH_MAX: usize = 8;
pub const VOCAB_SIZE: usize = (RING_MAX - RING_MIN + 1) + 1 + PATH_MAX + 1 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VocabEntry {
    Ring(usize),
    RingOverflow,
    Path(usize),
    PathOverflow,
    Articulation,
}

impl VocabEntry {
    /// Vocabulary slot of this entry.
    pub fn index(self) -> usize {
        FragmentVocabulary
            .entries()
            .iter()
            .position(|&e| e == self)
            .expect("entry within vocabulary range")
    }
}

impl std::fmt::Display for VocabEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Ring(k) => write!(f, "ring{k}"),
            Self::RingOverflow => f.write_str("ring_overflow"),
            Self::Path(k) => write!(f, "path{k}"),
            Self::PathOverflow => f.write_str("path_overflow"),
            Self::Articulation => f.write_str("articulation"),
        }
    }
}

impl std::str::FromStr for VocabEntry {
    type Err = String;

    /// Accepts the `Display` form, e.g. `ring6`, `path2`, `articulation`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FragmentVocabulary
            .entries()
            .into_iter()
            .find(|e| e.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| format!("unknown fragment query '{s}'"))
    }
}

/// Fixed fragment-type vocabulary: ring sizes 3..=8, ring overflow, path
/// lengths 1..=8, path overflow, articulation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FragmentVocabulary;

impl FragmentVocabulary {
    pub fn len(&self) -> usize {
        VOCAB_SIZE
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn entries(&self) -> Vec<VocabEntry> {
        let mut out: Vec<VocabEntry> = (RING_MIN..=RING_MAX).map(VocabEntry::Ring).collect();
        out.push(VocabEntry::RingOverflow);
        out.extend((1..=PATH_MAX).map(VocabEntry::Path));
        out.push(VocabEntry::PathOverflow);
        out.push(VocabEntry::Articulation);
        out
    }

    pub fn index_of_kind(&self, kind: FragmentKind) -> usize {
        const PATH_BASE: usize = RING_MAX - RING_MIN + 2;
        match kind {
            FragmentKind::Ring(k) if k <= RING_MAX => k.max(RING_MIN) - RING_MIN,
            FragmentKind::Ring(_) => PATH_BASE - 1,
            FragmentKind::Path(k) if k <= PATH_MAX => PATH_BASE + k.max(1) - 1,
            FragmentKind::Path(_) => PATH_BASE + PATH_MAX,
            FragmentKind::Articulation => VOCAB_SIZE - 1,
        }
    }

    pub fn vocab_index(&self, fragment: &Fragment) -> usize {
        self.index_of_kind(fragment.kind)
    }

    pub fn onehot(&self, fragment: &Fragment) -> [u8; VOCAB_SIZE] {
        let mut v = [0; VOCAB_SIZE];
        v[self.vocab_index(fragment)] = 1;
        v
    }
}
