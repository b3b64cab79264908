use crate::mdp::{ActionId, MdpModel, StateId, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Empty,
    X,
    O,
}

const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

const POW3: [usize; 9] = [1, 3, 9, 27, 81, 243, 729, 2187, 6561];

/// Tic-tac-toe as an alternating zero-sum game.
///
/// A state is the board in base 3 (cell `i` is digit `i`: 0 empty, 1 X,
/// 2 O); X moves first and the player to move follows from the piece counts.
/// Action `k` places a mark on the `k`-th empty cell in ascending order. The
/// winning move earns +1 for the mover and ends the game; filling the board
/// without a winner ends it with 0.
#[derive(Debug, Clone, Default)]
pub struct TicTacToe;

impl TicTacToe {
    pub fn new() -> Self {
        TicTacToe
    }

    pub fn decode(state: StateId) -> [Cell; 9] {
        let mut board = [Cell::Empty; 9];
        let mut s = state;
        for c in board.iter_mut() {
            *c = match s % 3 {
                0 => Cell::Empty,
                1 => Cell::X,
                _ => Cell::O,
            };
            s /= 3;
        }
        board
    }

    pub fn encode(board: &[Cell; 9]) -> StateId {
        board
            .iter()
            .enumerate()
            .map(|(i, c)| {
                POW3[i]
                    * match c {
                        Cell::Empty => 0,
                        Cell::X => 1,
                        Cell::O => 2,
                    }
            })
            .sum()
    }

    pub fn to_move(board: &[Cell; 9]) -> Cell {
        let xs = board.iter().filter(|&&c| c == Cell::X).count();
        let os = board.iter().filter(|&&c| c == Cell::O).count();
        if xs > os {
            Cell::O
        } else {
            Cell::X
        }
    }

    pub fn winner(board: &[Cell; 9]) -> Option<Cell> {
        LINES.iter().find_map(|l| {
            let c = board[l[0]];
            (c != Cell::Empty && board[l[1]] == c && board[l[2]] == c).then_some(c)
        })
    }

    pub fn is_over(board: &[Cell; 9]) -> bool {
        Self::winner(board).is_some() || board.iter().all(|&c| c != Cell::Empty)
    }

    /// Board cell targeted by action `action` in `state`.
    pub fn cell_of_action(state: StateId, action: ActionId) -> Option<usize> {
        let board = Self::decode(state);
        (0..9).filter(|&i| board[i] == Cell::Empty).nth(action)
    }
}

impl MdpModel for TicTacToe {
    fn name(&self) -> &str {
        "tic_tac_toe"
    }

    fn state_count(&self) -> usize {
        POW3[8] * 3
    }

    fn action_count(&self, state: StateId) -> usize {
        let board = Self::decode(state);
        board.iter().filter(|&&c| c == Cell::Empty).count().max(1)
    }

    fn transition(&self, state: StateId, action: ActionId) -> Transition {
        let board = Self::decode(state);
        let absorbing = Transition {
            next_state: state,
            reward: 0.0,
            terminal: true,
        };
        if Self::is_over(&board) {
            return absorbing;
        }
        let Some(cell) = Self::cell_of_action(state, action) else {
            return absorbing;
        };
        let mover = Self::to_move(&board);
        let mut next = board;
        next[cell] = mover;
        let next_state = Self::encode(&next);
        if Self::winner(&next) == Some(mover) {
            Transition {
                next_state,
                reward: 1.0,
                terminal: true,
            }
        } else {
            Transition {
                next_state,
                reward: 0.0,
                terminal: next.iter().all(|&c| c != Cell::Empty),
            }
        }
    }

    fn discount(&self) -> f64 {
        1.0
    }

    fn initial_state(&self) -> StateId {
        0
    }

    fn reward_bound(&self) -> f64 {
        1.0
    }

    fn horizon_bound(&self) -> usize {
        9
    }

    fn max_episode_length(&self) -> usize {
        9
    }

    fn two_player(&self) -> bool {
        true
    }

    fn describe_state(&self, state: StateId) -> String {
        Self::decode(state)
            .chunks(3)
            .map(|row| {
                row.iter()
                    .map(|c| match c {
                        Cell::Empty => '.',
                        Cell::X => 'X',
                        Cell::O => 'O',
                    })
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join("/")
    }
}
