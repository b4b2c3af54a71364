//! Longest common substring via a suffix automaton.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

struct State {
    len: usize,
    link: Option<usize>,
    next: BTreeMap<char, usize>,
}

struct SuffixAutomaton {
    states: Vec<State>,
    last: usize,
}

impl SuffixAutomaton {
    fn new(text: &[char]) -> SuffixAutomaton {
        let mut sa = SuffixAutomaton {
            states: alloc::vec![State {
                len: 0,
                link: None,
                next: BTreeMap::new(),
            }],
            last: 0,
        };
        for &c in text {
            sa.extend(c);
        }
        sa
    }

    fn extend(&mut self, c: char) {
        let cur = self.states.len();
        self.states.push(State {
            len: self.states[self.last].len + 1,
            link: None,
            next: BTreeMap::new(),
        });
        let mut p = Some(self.last);
        while let Some(pi) = p {
            if self.states[pi].next.contains_key(&c) {
                break;
            }
            self.states[pi].next.insert(c, cur);
            p = self.states[pi].link;
        }
        match p {
            None => self.states[cur].link = Some(0),
            Some(pi) => {
                let q = self.states[pi].next[&c];
                if self.states[pi].len + 1 == self.states[q].len {
                    self.states[cur].link = Some(q);
                } else {
                    let clone = self.states.len();
                    self.states.push(State {
                        len: self.states[pi].len + 1,
                        link: self.states[q].link,
                        next: self.states[q].next.clone(),
                    });
                    let mut p = Some(pi);
                    while let Some(pj) = p {
                        if self.states[pj].next.get(&c) != Some(&q) {
                            break;
                        }
                        self.states[pj].next.insert(c, clone);
                        p = self.states[pj].link;
                    }
                    self.states[q].link = Some(clone);
                    self.states[cur].link = Some(clone);
                }
            }
        }
        self.last = cur;
    }
}

/// Length in characters of the longest string occurring in both inputs.
pub fn longest_common_substring(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    if a.is_empty() {
        return 0;
    }
    let sa = SuffixAutomaton::new(&a);
    let (mut state, mut len, mut best) = (0usize, 0usize, 0usize);
    for c in b.chars() {
        while state != 0 && !sa.states[state].next.contains_key(&c) {
            state = sa.states[state].link.unwrap_or(0);
            len = sa.states[state].len;
        }
        if let Some(&n) = sa.states[state].next.get(&c) {
            state = n;
            len += 1;
        } else {
            state = 0;
            len = 0;
        }
        best = best.max(len);
    }
    best
}

/// Collapses whitespace runs to single spaces and trims.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}
