//! Data files bundled into the library.

pub const TOY_DRIFT_V1: &str = include_str!("../assets/scm/toy_drift_v1.json");
pub const DRIFT3: &str = include_str!("../assets/scm/drift3.json");

pub const OPINIONQA_BANK: &str = include_str!("../assets/question_banks/opinionqa.json");
pub const BOOK_BANK: &str = include_str!("../assets/question_banks/book_opinions.json");
pub const MOVIE_BANK: &str = include_str!("../assets/question_banks/movielens.json");

/// Books discussed in the agent scenario: (title, author).
pub const BOOKS: [(&str, &str); 5] = [
    (
        "Way Out There In The Blue: Reagan, Star Wars And The End Of The Cold War",
        "Frances Fitzgerald",
    ),
    ("There There", "Tommy Orange"),
    ("Redeployment", "Phil Klay"),
    ("The Door", "Magda Szabo"),
    ("Nothing To Be Frightened Of", "Julian Barnes"),
];

/// Movies discussed in the agent scenario: (title, genres).
pub const MOVIES: [(&str, &str); 5] = [
    ("Other Side of Sunday, The (Søndagsengler) (1996)", "Comedy|Drama"),
    ("Death in Brunswick (1991)", "Comedy"),
    ("Buddy (1997)", "Adventure|Children's|Drama"),
    ("Paris, Texas (1984)", "Drama"),
    (
        "Lovers of the Arctic Circle, The (Los Amantes del Círculo Polar) (1998)",
        "Drama|Romance",
    ),
];
