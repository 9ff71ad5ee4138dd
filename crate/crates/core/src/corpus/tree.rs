//! Dependency tree checks over head vectors.
//!
//! `heads[i]` is the head of token `i + 1`; 0 denotes the pseudo root.

/// Why a head vector is not a single-rooted arborescence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeError {
    Empty,
    HeadOutOfRange { token: usize, head: usize },
    SelfLoop { token: usize },
    NoRoot,
    MultipleRoots { tokens: Vec<usize> },
    Cycle { tokens: Vec<usize> },
}

impl std::fmt::Display for TreeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TreeError::Empty => write!(f, "empty sentence"),
            TreeError::HeadOutOfRange { token, head } => {
                write!(f, "token {} has head {} out of range", token, head)
            }
            TreeError::SelfLoop { token } => write!(f, "token {} is its own head", token),
            TreeError::NoRoot => write!(f, "no token attaches to the root"),
            TreeError::MultipleRoots { tokens } => {
                write!(f, "several tokens attach to the root: {:?}", tokens)
            }
            TreeError::Cycle { tokens } => write!(f, "cycle through tokens {:?}", tokens),
        }
    }
}

/// Checks that `heads` forms a tree rooted at 0 with exactly one root child.
pub fn check_tree(heads: &[usize]) -> Result<(), TreeError> {
    let n = heads.len();
    if n == 0 {
        return Err(TreeError::Empty);
    }
    for (i, &h) in heads.iter().enumerate() {
        if h > n {
            return Err(TreeError::HeadOutOfRange { token: i + 1, head: h });
        }
        if h == i + 1 {
            return Err(TreeError::SelfLoop { token: i + 1 });
        }
    }
    if let Some(cycle) = find_cycle(heads) {
        return Err(TreeError::Cycle { tokens: cycle });
    }
    let roots: Vec<usize> = (1..=n).filter(|&d| heads[d - 1] == 0).collect();
    match roots.len() {
        0 => Err(TreeError::NoRoot),
        1 => Ok(()),
        _ => Err(TreeError::MultipleRoots { tokens: roots }),
    }
}

pub fn is_tree(heads: &[usize]) -> bool {
    check_tree(heads).is_ok()
}

/// Returns the tokens of some cycle in the head graph, if any. Heads outside
/// `0..=n` are treated as pointing to the root.
pub fn find_cycle(heads: &[usize]) -> Option<Vec<usize>> {
    let n = heads.len();
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            path.push(v);
            let h = heads[v - 1];
            v = if h > n { 0 } else { h };
        }
        if state[v] == 1 {
            let pos = path.iter().position(|&x| x == v).unwrap();
            return Some(path[pos..].to_vec());
        }
        for p in path {
            state[p] = 2;
        }
    }
    None
}
