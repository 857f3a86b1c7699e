"""
Text format for extensive-form games, built-in benchmark games and signal files.

Game grammar (line oriented, `#` starts a comment):

    game <name> players <N>
    node <id> player <p> infoset <label> { <action> -> <child>, ... }
    node <id> chance { <action> : <prob> -> <child>, ... }
    node <id> terminal { <payoff-1>, ..., <payoff-N> }

The first node is the root. Players are numbered from 1 in the file; infoset
labels are scoped per player. Probabilities are decimals or `p/q` fractions.
"""

import hashlib
import re
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from . import config
from .exceptions import (
    GameParseError,
    GameStructureError,
    ProbabilitySumError,
    SignalFormatError,
    UnknownIdError,
)
from .game_model import build_game, validate_perfect_recall
from .logger import get_logger
from .models import CHANCE, TERMINAL, EmpiricalSignal, GameDocument, GameTree, NodeRecord, PureStrategyProfile

logger = get_logger(__name__)

_TOKEN = re.compile(r"\s*(->|[{},:]|[^\s{},:#]+?(?=->|[\s{},:#]|$))")

Token = Tuple[str, int, int]


def _tokenize(line: str, line_no: int, path: Optional[str]) -> List[Token]:
    text = line.split("#", 1)[0].rstrip()
    tokens: List[Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None or match.end() == pos:
            raise GameParseError("E-SYNTAX", f"unexpected character {text[pos]!r}", line_no, pos + 1, path)
        tokens.append((match.group(1), line_no, match.start(1) + 1))
        pos = match.end()
    return tokens


class _Cursor:
    """Token cursor over one logical statement."""

    def __init__(self, tokens: List[Token], path: Optional[str]):
        self.tokens = tokens
        self.pos = 0
        self.path = path

    def peek(self) -> Optional[str]:
        return self.tokens[self.pos][0] if self.pos < len(self.tokens) else None

    def where(self) -> Tuple[int, int]:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos][1], self.tokens[self.pos][2]
        last = self.tokens[-1]
        return last[1], last[2] + len(last[0])

    def error(self, message: str, code: str = "E-SYNTAX") -> GameParseError:
        line, column = self.where()
        return GameParseError(code, message, line, column, self.path)

    def take(self, expected: Optional[str] = None) -> str:
        token = self.peek()
        if token is None:
            raise self.error(f"expected {expected!r}, found end of statement" if expected
                             else "unexpected end of statement")
        if expected is not None and token != expected:
            raise self.error(f"expected {expected!r}, found {token!r}")
        self.pos += 1
        return token

    def word(self, what: str) -> str:
        token = self.peek()
        if token is None or token in ("{", "}", ",", ":", "->"):
            raise self.error(f"expected {what}, found {token!r}" if token else f"expected {what}")
        self.pos += 1
        return token

    def number(self, what: str) -> float:
        line, column = self.where()
        token = self.word(what)
        try:
            return parse_number(token)
        except (ValueError, ZeroDivisionError):
            raise GameParseError("E-SYNTAX", f"invalid {what} {token!r}", line, column, self.path)

    def closes(self) -> bool:
        """Consume a ',' (more entries follow) or a '}' (block closed)."""
        token = self.take()
        if token == "}":
            return True
        if token != ",":
            self.pos -= 1
            raise self.error(f"expected ',' or '}}', found {token!r}")
        return False

    def done(self) -> None:
        if self.peek() is not None:
            raise self.error(f"unexpected {self.peek()!r}")


def parse_number(token: str) -> float:
    """Decimal or p/q fraction."""
    if "/" in token:
        return float(Fraction(token))
    return float(token)


def _statements(text: str, path: Optional[str]) -> List[List[Token]]:
    """Group tokens into statements; a `{ ... }` block may span several lines."""
    statements: List[List[Token]] = []
    current: List[Token] = []
    depth = 0
    for line_no, line in enumerate(text.splitlines(), start=1):
        for token in _tokenize(line.rstrip("\r"), line_no, path):
            if token[0] in ("game", "node") and depth == 0 and current:
                statements.append(current)
                current = []
            current.append(token)
            if token[0] == "{":
                depth += 1
            elif token[0] == "}":
                depth -= 1
                if depth < 0:
                    raise GameParseError("E-SYNTAX", "unbalanced '}'", token[1], token[2], path)
    if depth:
        raise GameParseError("E-SYNTAX", "unterminated '{' block", current[-1][1], current[-1][2], path)
    if current:
        statements.append(current)
    return statements


def parse_document(text: str, path: Optional[str] = None) -> GameDocument:
    """Parse the text format into a GameDocument without building the tree."""
    comments = [line.split("#", 1)[1].strip() for line in text.splitlines() if "#" in line]
    statements = _statements(text, path)
    if not statements:
        raise GameParseError("E-HEADER", "empty game document", 1, 1, path)

    header = _Cursor(statements[0], path)
    if header.peek() != "game":
        raise header.error("document must start with 'game <name> players <N>'", "E-HEADER")
    header.take("game")
    name = header.word("game name")
    header.take("players")
    line, column = header.where()
    players_token = header.word("player count")
    if not players_token.isdigit() or int(players_token) < 1:
        raise GameParseError("E-HEADER", f"invalid player count {players_token!r}", line, column, path)
    header.done()
    document = GameDocument(name=name, players=int(players_token), comments=comments)

    for tokens in statements[1:]:
        document.nodes.append(_parse_node(_Cursor(tokens, path), document.players))
    if not document.nodes:
        raise GameParseError("E-STRUCTURE", "game has no nodes", statements[0][0][1], 1, path)
    return document


def _parse_node(cursor: _Cursor, players: int) -> NodeRecord:
    if cursor.peek() == "game":
        raise cursor.error("duplicate 'game' header", "E-HEADER")
    line, column = cursor.where()
    cursor.take("node")
    node_id = cursor.word("node id")
    kind = cursor.word("node kind")
    record = NodeRecord(id=node_id, kind=kind, line=line, column=column)

    if kind == "player":
        p_line, p_column = cursor.where()
        player_token = cursor.word("player number")
        if not player_token.isdigit() or not 1 <= int(player_token) <= players:
            raise GameParseError("E-HEADER", f"player must be in 1..{players}, found {player_token!r}",
                                 p_line, p_column, cursor.path)
        record.player = int(player_token) - 1
        cursor.take("infoset")
        record.infoset = cursor.word("infoset label")
        cursor.take("{")
        while True:
            action = cursor.word("action")
            cursor.take("->")
            record.actions.append((action, cursor.word("child id")))
            if cursor.closes():
                break
    elif kind == "chance":
        cursor.take("{")
        while True:
            action = cursor.word("action")
            cursor.take(":")
            record.probabilities.append(cursor.number("probability"))
            if cursor.peek() == ",":
                cursor.take(",")
            cursor.take("->")
            record.actions.append((action, cursor.word("child id")))
            if cursor.closes():
                break
    elif kind == "terminal":
        cursor.take("{")
        while True:
            record.payoffs.append(cursor.number("payoff"))
            if cursor.closes():
                break
    else:
        raise cursor.error(f"node kind must be player, chance or terminal, found {kind!r}")
    cursor.done()
    return record


def parse_game(text: str, path: Optional[str] = None) -> GameTree:
    """Parse, build and validate (structure, chance sums, perfect recall) a game document."""
    document = parse_document(text, path)
    # a duplicated id resolves to its later occurrence, where the error is raised
    positions = {record.id: (record.line, record.column) for record in document.nodes}
    first = document.nodes[0]
    try:
        game = build_game(document)
    except ProbabilitySumError as e:
        line, column = positions.get(e.node_id, (e.line, 1))
        raise ProbabilitySumError(e.node_id, e.total, line, column, path)
    except GameStructureError as e:
        line, column = positions.get(e.node_id or "", (first.line, first.column))
        raise GameParseError(e.code, str(e), line, column, path)

    report = validate_perfect_recall(game)
    if not report.ok:
        violation = report.violations[0]
        node = game.infosets[violation.infoset].nodes[-1]
        raise GameParseError(
            "E-RECALL",
            f"perfect recall violated at infoset '{violation.label}': "
            f"{_render_ancestry(game, violation.first)} vs {_render_ancestry(game, violation.second)}",
            positions.get(game.node_labels[node], (0, 1))[0], 1, path)
    logger.debug(f"Parsed game '{game.name}' ({game.num_infosets} infosets)")
    return game


def _render_ancestry(game: GameTree, ancestry) -> str:
    if not ancestry:
        return "(root)"
    return " ".join(f"{game.infosets[i].label}={game.infosets[i].actions[a]}" for i, a in ancestry)


def read_game(path: Union[str, Path]) -> GameTree:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_game(text, str(path))


def load_game(spec: str) -> GameTree:
    """Resolve `builtin:<name>` or a file path."""
    if spec.startswith(config.BUILTIN_PREFIX):
        return builtin_game(spec[len(config.BUILTIN_PREFIX):])
    return read_game(spec)


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------

def _format_number(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def _format_probability(value: float) -> str:
    fraction = Fraction(value).limit_denominator(1000)
    if fraction.denominator > 1 and float(fraction) == value:
        return f"{fraction.numerator}/{fraction.denominator}"
    return _format_number(value)


def serialize_game(game: GameTree) -> str:
    """Inverse of parse_game: nodes are written in interned preorder."""
    lines = [f"game {game.name} players {game.num_players}"]
    for node, label in enumerate(game.node_labels):
        owner = game.node_owner[node]
        edges = zip(game.node_action_labels[node], game.node_children[node])
        if owner == TERMINAL:
            body = ", ".join(_format_number(v) for v in game.payoffs[node])
            lines.append(f"node {label} terminal {{ {body} }}")
        elif owner == CHANCE:
            body = ", ".join(f"{action} : {_format_probability(p)} -> {game.node_labels[child]}"
                             for (action, child), p in zip(edges, game.chance_probs[node]))
            lines.append(f"node {label} chance {{ {body} }}")
        else:
            infoset = game.infosets[game.node_infoset[node]]
            body = ", ".join(f"{action} -> {game.node_labels[child]}" for action, child in edges)
            lines.append(f"node {label} player {owner + 1} infoset {infoset.label} {{ {body} }}")
    return "\n".join(lines) + "\n"


def game_digest(game: GameTree) -> str:
    """Stable short hash of the serialised game, recorded in trace headers."""
    return hashlib.sha256(serialize_game(game).encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Built-in games
# ---------------------------------------------------------------------------

MATCHING_PENNIES = """\
game matching_pennies players 2
node root player 1 infoset I1 { H -> h, T -> t }
node h player 2 infoset I2 { h -> hh, t -> ht }
node t player 2 infoset I2 { h -> th, t -> tt }
node hh terminal { 1, -1 }
node ht terminal { -1, 1 }
node th terminal { -1, 1 }
node tt terminal { 1, -1 }
"""

TWO_STAGE_SOLO = """\
game two_stage_solo players 1
node root player 1 infoset I1 { A -> second, B -> b }
node second player 1 infoset I2 { C -> ac, D -> ad }
node ac terminal { 1 }
node ad terminal { 0 }
node b terminal { 0.5 }
"""

# player 1's Out blocks player 2's only infoset
GATED_ENTRY = """\
game gated_entry players 2
node root player 1 infoset I1 { In -> entry, Out -> out }
node entry player 2 infoset I2 { L -> in_l, R -> in_r }
node in_l terminal { 2, 1 }
node in_r terminal { 0, 2 }
node out terminal { 1, 1 }
"""

BATTLE_OF_SEXES_SEQ = """\
game battle_of_sexes_seq players 2
node root player 1 infoset I1 { X -> x, Y -> y }
node x player 2 infoset I2 { x -> xx, y -> xy }
node y player 2 infoset I2 { x -> yx, y -> yy }
node xx terminal { 2, 1 }
node xy terminal { 0, 0 }
node yx terminal { 0, 0 }
node yy terminal { 1, 2 }
"""


def _kuhn_poker() -> str:
    cards = "JQK"
    deals = [(c1, c2) for c1 in cards for c2 in cards if c1 != c2]
    lines = ["game kuhn_poker players 2",
             "node deal chance { " + ", ".join(f"{a}{b} : 1/6 -> {a}{b}" for a, b in deals) + " }"]
    for c1, c2 in deals:
        d = f"{c1}{c2}"
        win = 1 if cards.index(c1) > cards.index(c2) else -1
        lines += [
            f"node {d} player 1 infoset {c1} {{ check -> {d}.c, bet -> {d}.b }}",
            f"node {d}.c player 2 infoset {c2}_c {{ check -> {d}.cc, bet -> {d}.cb }}",
            f"node {d}.cc terminal {{ {win}, {-win} }}",
            f"node {d}.cb player 1 infoset {c1}_cb {{ fold -> {d}.cbf, call -> {d}.cbc }}",
            f"node {d}.cbf terminal {{ -1, 1 }}",
            f"node {d}.cbc terminal {{ {2 * win}, {-2 * win} }}",
            f"node {d}.b player 2 infoset {c2}_b {{ fold -> {d}.bf, call -> {d}.bc }}",
            f"node {d}.bf terminal {{ 1, -1 }}",
            f"node {d}.bc terminal {{ {2 * win}, {-2 * win} }}",
        ]
    return "\n".join(lines) + "\n"


BUILTIN_GAMES = {
    "matching_pennies": lambda: MATCHING_PENNIES,
    "two_stage_solo": lambda: TWO_STAGE_SOLO,
    "gated_entry": lambda: GATED_ENTRY,
    "battle_of_sexes_seq": lambda: BATTLE_OF_SEXES_SEQ,
    "kuhn_poker": _kuhn_poker,
}


def builtin_game(name: str) -> GameTree:
    if name not in BUILTIN_GAMES:
        raise UnknownIdError(f"unknown builtin game '{name}' (known: {', '.join(BUILTIN_GAMES)})")
    return parse_game(BUILTIN_GAMES[name](), f"{config.BUILTIN_PREFIX}{name}")


# ---------------------------------------------------------------------------
# Signal files: `weight <w> profile <infoset>=<action> ...`
# ---------------------------------------------------------------------------

def _infoset_lookup(game: GameTree) -> Dict[str, int]:
    """Accepts `P<k>/<label>` always, and bare `<label>` when no other player uses it."""
    lookup: Dict[str, int] = {}
    counts: Dict[str, int] = {}
    for info in game.infosets:
        counts[info.label] = counts.get(info.label, 0) + 1
    for info in game.infosets:
        lookup[game.infoset_path(info.id)] = info.id
        if counts[info.label] == 1:
            lookup[info.label] = info.id
    return lookup


def profile_label(game: GameTree, infoset_id: int) -> str:
    info = game.infosets[infoset_id]
    unique = sum(1 for other in game.infosets if other.label == info.label) == 1
    return info.label if unique else game.infoset_path(infoset_id)


def parse_signal(game: GameTree, text: str) -> EmpiricalSignal:
    """Parse a signal file. Every profile must assign every infoset; weights must sum to 1."""
    lookup = _infoset_lookup(game)
    weights: Dict[PureStrategyProfile, float] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 3 or parts[0] != "weight" or parts[2] != "profile":
            raise SignalFormatError("expected 'weight <w> profile <infoset>=<action> ...'", line_no)
        try:
            weight = parse_number(parts[1])
        except (ValueError, ZeroDivisionError):
            raise SignalFormatError(f"invalid weight {parts[1]!r}", line_no)
        if weight < 0:
            raise SignalFormatError(f"negative weight {parts[1]!r}", line_no)
        choices: List[Optional[int]] = [None] * game.num_infosets
        for item in parts[3:]:
            label, sep, action = item.partition("=")
            if not sep or label not in lookup:
                raise SignalFormatError(f"unknown infoset assignment {item!r}", line_no)
            info = game.infosets[lookup[label]]
            if action not in info.actions:
                raise SignalFormatError(f"action {action!r} not in A({label}) = {list(info.actions)}", line_no)
            choices[info.id] = info.actions.index(action)
        missing = [profile_label(game, i) for i, c in enumerate(choices) if c is None]
        if missing:
            raise SignalFormatError("profile is incomplete", line_no, [f"missing {m}" for m in missing])
        profile = PureStrategyProfile(tuple(int(c) for c in choices if c is not None))
        weights[profile] = weights.get(profile, 0.0) + weight

    total = sum(weights.values())
    if abs(total - 1.0) > config.SIGNAL_WEIGHT_TOLERANCE:
        raise SignalFormatError(f"signal weights sum to {total!r}, expected 1")
    if abs(total - 1.0) > config.TOLERANCE:
        logger.warning(f"Renormalising signal weights that sum to {total!r}")
        weights = {profile: w / total for profile, w in weights.items()}
    return EmpiricalSignal(weights)


def serialize_signal(game: GameTree, signal: EmpiricalSignal) -> str:
    """Strategic profiles only; chance-keeping signals are marginalised first."""
    merged: Dict[Tuple[int, ...], float] = {}
    for profile, weight in signal.weights.items():
        merged[profile.choices] = merged.get(profile.choices, 0.0) + weight
    lines = []
    for choices, weight in merged.items():
        assignments = " ".join(f"{profile_label(game, i)}={game.infosets[i].actions[a]}"
                               for i, a in enumerate(choices))
        lines.append(f"weight {repr(float(weight))} profile {assignments}")
    return "\n".join(lines) + "\n"

