"""Hand-scored fixtures for entity-level scoring.

Each fixture is (name, gold label sentences, predicted label sentences,
expected overall (gold, pred, correct, P, R, F1)).  Counts were worked out
by hand from the span definitions; P/R/F1 are the 2-decimal renderings.
"""

FIXTURES = [
    # gold (LOC,0,1),(PER,3,3); pred (LOC,0,1),(PER,2,3)
    ("fifty", [["B-LOC", "I-LOC", "O", "B-PER"]], [["B-LOC", "I-LOC", "B-PER", "I-PER"]],
     (2, 2, 1, "50.00", "50.00", "50.00")),
    ("identical", [["B-PER", "I-PER", "O", "B-ORG"]], [["B-PER", "I-PER", "O", "B-ORG"]],
     (2, 2, 2, "100.00", "100.00", "100.00")),
    ("all-O prediction", [["B-PER", "O", "B-LOC"]], [["O", "O", "O"]],
     (2, 0, 0, "0.00", "0.00", "0.00")),
    ("nothing gold", [["O", "O"]], [["B-MISC", "O"]],
     (0, 1, 0, "0.00", "0.00", "0.00")),
    ("wrong type", [["B-PER", "I-PER"]], [["B-ORG", "I-ORG"]],
     (1, 1, 0, "0.00", "0.00", "0.00")),
    ("end too short", [["B-ORG", "I-ORG", "I-ORG"]], [["B-ORG", "I-ORG", "O"]],
     (1, 1, 0, "0.00", "0.00", "0.00")),
    # split into two predicted spans: neither matches
    ("split span", [["B-LOC", "I-LOC", "O", "O"]], [["B-LOC", "B-LOC", "O", "O"]],
     (1, 2, 0, "0.00", "0.00", "0.00")),
    # I-PER at start is repaired to B-PER in both, so it matches
    ("repaired I", [["I-PER", "I-PER", "O"]], [["B-PER", "I-PER", "O"]],
     (1, 1, 1, "100.00", "100.00", "100.00")),
    # two sentences: gold PER, LOC, ORG(0,1); pred PER, MISC, LOC, ORG(0,0), ORG(1,1)
    # 3 gold, 5 pred, 2 correct; P=40, R=66.67, F=50
    ("two sentences",
     [["B-PER", "O", "B-LOC"], ["B-ORG", "I-ORG"]],
     [["B-PER", "B-MISC", "B-LOC"], ["B-ORG", "B-ORG"]],
     (3, 5, 2, "40.00", "66.67", "50.00")),
    # gold 3 spans, pred 1 matching: P=100, R=33.33, F=50
    ("high precision", [["B-PER", "O", "B-LOC", "O", "B-ORG"]], [["B-PER", "O", "O", "O", "O"]],
     (3, 1, 1, "100.00", "33.33", "50.00")),
    # type mismatch continuation repaired: B-LOC I-PER -> LOC(0,0), PER(1,1)
    ("repaired type switch", [["B-LOC", "B-PER"]], [["B-LOC", "I-PER"]],
     (2, 2, 2, "100.00", "100.00", "100.00")),
]
