"""Deterministic desk-scale assets: synonym lexicon, sentiment corpus, pretrained vectors.

The corpus is a binary review corpus drawn from a bag-of-words generative model. Every
content word carries a class log-odds; head sentiment words are strongly polarized while
many of their synonyms are rare and drift towards the other class, which is the kind of
dataset bias universal replacement rules feed on. A small share of sentiment adjectives
appear negated ("not brilliant" in a negative review), which only order-aware models can
read.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .corpus import ADJ, ADV, NOUN, VERB

LABELS = ("positive", "negative")

# "POS head: synonyms" groups. Multi-word synonyms are kept on purpose: the lexicon loader
# must drop them, as it would for a flattened WordNet dump.
_GROUPS = """
ADJ +brilliant: brainy, bright, smart, clever, gifted, superb
ADJ +glorious: splendiferous, resplendent, magnificent, splendid, superb
ADJ +excellent: splendid, first-rate, superb, fantabulous, first_class
ADJ +good: beneficial, estimable, respectable, dear, serious, ripe, salutary, upright
ADJ +fine: all right, okay, ok, hunky-dory, delicate, exquisite
ADJ +wonderful: marvelous, fantastic, grand, howling, terrific, tremendous
ADJ +beautiful: gorgeous, lovely, pretty, ravishing, graceful
ADJ +funny: amusing, comic, comical, laughable, risible, odd, peculiar
ADJ +moving: touching, poignant, affecting, stirring, animated
ADJ +charming: captivating, enchanting, entrancing, fascinating, magical
ADJ +great: outstanding, big, large, dandy, groovy, keen, neat, nifty, swell
ADJ +fresh: new, novel, impertinent, saucy, sassy, refreshing
ADJ +entertaining: amusing, diverting, engaging, absorbing
ADJ +powerful: potent, strong, mighty, hefty
ADJ +perfect: arrant, complete, consummate, utter, pure, stark
ADJ +heartfelt: sincere, earnest, devout, genuine
ADJ +smart: chic, voguish, saucy, clever, impudent
ADJ +solid: firm, strong, substantial, square, unanimous
ADJ +warm: ardent, fervent, fervid, lovesome, tender, affectionate
ADJ +memorable: unforgettable, notable, remarkable, signal
ADJ +rich: deep, fat, full-bodied, robust, plentiful, ample
ADJ +clever: cagey, cagy, canny, apt, ingenious, adroit
ADJ -dull: boring, deadening, irksome, slow, tedious, tiresome, blunt, leaden
ADJ -bad: big, tough, spoiled, spoilt, regretful, sorry, risky, speculative
ADJ -boring: tedious, tiresome, wearisome, dull, monotonous
ADJ -stupid: dumb, dense, obtuse, slow, unintelligent, foolish
ADJ -awful: awesome, amazing, dreadful, fearful, frightful, terrible, atrocious, abominable
ADJ -terrible: atrocious, abominable, awful, dreadful, painful, unspeakable, dire, wicked
ADJ -mediocre: average, fair, middling, ordinary, second-rate
ADJ -average: mediocre, ordinary, median, mean, modal
ADJ -bizarre: outlandish, outre, eccentric, freakish, freaky, flaky, weird, queer
ADJ -excruciating: harrowing, agonizing, agonising, torturous, painful
ADJ -routine: everyday, mundane, quotidian, unremarkable, workaday
ADJ -weak: feeble, watery, washy, faint, light
ADJ -predictable: foreseeable, inevitable, expected
ADJ -silly: airheaded, dizzy, giddy, absurd, goofy, sappy, wacky, zany
ADJ -flat: categoric, level, plane, monotone, bland, insipid, vapid
ADJ -lame: game, gimpy, halt, crippled, unconvincing
ADJ -pointless: inutile, otiose, unavailing, useless, purposeless, senseless
ADJ -tired: banal, commonplace, hackneyed, trite, stale, timeworn
ADJ -ugly: despicable, vile, slimy, unworthy, worthless, wretched
ADJ -messy: disorderly, untidy, sloppy, chaotic, muddled
ADJ -shallow: superficial, trivial, cursory, empty
NOUN -flaws: flaw, defect, blemish, fault, imperfection
NOUN -mess: messiness, muddle, fix, hole, jam, pickle, batch, heap
NOUN -failure: loser, nonstarter, bankruptcy, flop, bust
NOUN -toilet: bathroom, lavatory, lav, can, john, privy, commode, throne
NOUN -waste: wastefulness, dissipation, barren, wasteland, thriftlessness
NOUN -cliche: bromide, platitude, banality, commonplace, chestnut
NOUN -bore: dullard, drill, tidal bore, eagre, aegir
NOUN -disaster: catastrophe, calamity, tragedy, cataclysm, fiasco
NOUN +masterpiece: chef-d'oeuvre, classic, treasure, gem
NOUN +delight: pleasure, joy, enjoyment, delectation
NOUN +triumph: victory, success, achievement, conquest
NOUN +charm: appeal, attractiveness, magic, spell, allure
NOUN +gem: jewel, treasure, pearl, precious stone
NOUN +wit: humor, humour, witticism, wittiness, brain
NOUN film: movie, picture, moving picture, flick, pic, celluloid
NOUN movie: film, picture, flick, pic, motion picture
NOUN story: narrative, narration, tale, account, report, history
NOUN plot: secret plan, game, patch, plat, diagram, scheme
NOUN characters: roles, parts, personas, fictional characters
NOUN actor: histrion, player, thespian, doer, worker
NOUN performance: presentation, execution, carrying out, operation
NOUN director: manager, conductor, managing director, film maker
NOUN script: book, playscript, handwriting, hand, screenplay
NOUN music: euphony, medicine, score, soundtrack
NOUN scene: scenery, view, shot, setting, background, panorama
NOUN ending: conclusion, finish, end, last, termination, finale
NOUN time: clip, meter, metre, sentence, period, fourth dimension
NOUN world: universe, existence, creation, cosmos, earth, globe
NOUN life: living, animation, aliveness, liveliness, lifetime
NOUN web: network, vane, entanglement, mesh
NOUN family: household, home, menage, kin, kinfolk
NOUN war: warfare, conflict, state of war, campaign
NOUN love: passion, beloved, dear, honey, lovemaking
NOUN comedy: funniness, drollery, clowning, fun, farce
NOUN drama: dramatic play, play, theater, theatre
NOUN heart: bosom, mettle, nerve, spunk, center, core
NOUN audience: hearing, interview, viewers, crowd
NOUN work: oeuvre, employment, study, workplace, labor
NOUN style: manner, mode, way, fashion, panache, flair
NOUN moments: minutes, seconds, instants, bits
NOUN camera: photographic camera, television camera, lens
NOUN cast: mold, mould, form, shape, company, troupe
NOUN effects: personal effects, impressions, results, outcomes
NOUN dialogue: duologue, talks, conversation, exchange
NOUN city: metropolis, urban center, town, burg
NOUN man: adult male, gentleman, fellow, guy, chap
NOUN woman: adult female, lady, womanhood, dame, gal
NOUN kids: children, youngsters, minors, nippers, tikes
NOUN hero: champion, protagonist, supporter, paladin
NOUN journey: travel, trip, voyage, passage, odyssey
NOUN tale: narrative, fable, yarn, legend, account
NOUN house: home, dwelling, abode, domicile, household
NOUN night: nighttime, dark, evening, eve
NOUN summer: summertime, season
NOUN book: volume, tome, script, ledger
NOUN screen: silver screen, blind, cover, sieve
VERB keep: preserve, retain, hold, maintain, continue, save
VERB make: create, produce, construct, build, fashion
VERB show: demonstrate, establish, prove, present, depict, display
VERB tell: state, say, narrate, recount, recite, separate
VERB feel: experience, find, sense, palpate, finger
VERB find: discover, detect, notice, observe, regain
VERB see: view, watch, visualize, envision, fancy, consider
VERB give: yield, afford, impart, render, hand
VERB watch: view, see, observe, catch, follow
VERB become: go, get, turn, wax, suit
VERB seems: appears, looks, sounds
VERB tries: attempts, essays, assays, strives
VERB lacks: wants, needs, misses, requires
VERB works: functions, operates, goes, runs, acts
VERB falls: descends, drops, decreases, sinks, tumbles
VERB manages: handles, deals, contrives, copes, oversees
VERB captures: captivates, catches, seizes, grabs, bewitches
VERB delivers: provides, supplies, renders, hands
VERB explores: investigates, probes, examines, researches
VERB plays: performs, acts, represents, toys, diddles
VERB offers: provides, gives, proffers, extends, bids
VERB drags: hauls, tows, lugs, trails, sweeps
VERB fails: betrays, neglects, flunks, bombs, miscarries
VERB loves: enjoys, adores, cherishes, relishes
VERB hates: detests, loathes, abhors, despises
ADV really: truly, genuinely, actually, very, real, rattling
ADV very: really, real, rattling, highly, extremely
ADV quite: rather, pretty, fairly, altogether, wholly, totally
ADV too: also, besides, likewise, excessively, overly
ADV just: merely, simply, only, barely, hardly, exactly
ADV simply: merely, just, only, plainly, but
ADV well: easily, comfortably, advantageously, intimately
ADV never: ne'er, at no time, not ever
ADV always: ever, constantly, invariably, perpetually, forever
ADV often: frequently, oftentimes, oft, ofttimes
ADV finally: eventually, lastly, ultimately, at last
ADV rarely: seldom, infrequently
ADV completely: wholly, totally, entirely, altogether, whole
ADV beautifully: attractively, handsomely, gorgeously
ADV ultimately: finally, eventually, lastly, in the end
ADV hardly: barely, scarcely, just, only
ADV sadly: unfortunately, unhappily, regrettably, deplorably
ADV surprisingly: amazingly, astonishingly, unexpectedly
"""

_FUNCTION_WORDS = (
    "the a an and of to is in it that this with as for its on but by his her their "
    "be are was at from has have one all who what which than so there about into more "
    "out up some if he she they we you i can will would only other when"
).split()

_PUNCT = [",", ".", "!", "?", ";"]


@dataclass(frozen=True)
class WordGroup:
    pos: str
    head: str
    polarity: int  # +1 positive head, -1 negative head, 0 neutral
    synonyms: tuple[str, ...]


def word_groups() -> list[WordGroup]:
    groups = []
    for line in _GROUPS.strip().splitlines():
        left, right = line.split(":", 1)
        pos, head = left.split()
        polarity = {"+": 1, "-": -1}.get(head[0], 0)
        head = head.lstrip("+-")
        syns = tuple(s.strip() for s in right.split(",") if s.strip())
        groups.append(WordGroup(pos, head, polarity, syns))
    return groups


def _stable_rng(*keys) -> np.random.Generator:
    return np.random.default_rng([zlib.crc32(str(k).encode()) for k in keys])


def lexicon_lines(seed: int = 7) -> list[str]:
    """One entry per head word, plus entries for about half of the candidate words.

    Candidate-only words get an entry listing the head and the other group members, so
    the lexicon is deliberately not symmetric.
    """
    lines = ["# word\tPOS\tcomma-separated synonyms (desk lexicon, WordNet-style)"]
    for g in word_groups():
        lines.append(f"{g.head}\t{g.pos}\t{','.join(g.synonyms)}")
    for g in word_groups():
        for s in g.synonyms:
            if " " in s or "_" in s or "-" in s:
                continue
            if _stable_rng(seed, "rev", g.head, s).random() < 0.5:
                others = [g.head] + [o for o in g.synonyms if o != s]
                lines.append(f"{s}\t{g.pos}\t{','.join(others)}")
    return lines


@dataclass(frozen=True)
class DeskConfig:
    n_train: int = 9000
    n_test: int = 1000
    seed: int = 13
    min_len: int = 8
    max_len: int = 22
    label_noise: float = 0.08
    negation_rate: float = 0.05
    head_strength: float = 2.2
    bias_scale: float = 1.4
    rare_share: float = 0.3


class _WordModel:
    """Per-word frequency and class log-odds."""

    def __init__(self, cfg: DeskConfig):
        rng = np.random.default_rng(cfg.seed)
        self.words: list[str] = []
        self.pos: list[str] = []
        self.freq: list[float] = []
        self.logodds: list[float] = []
        self.polar_adj: dict[int, list[int]] = {1: [], -1: []}
        seen: dict[str, int] = {}

        def add(w, pos, f, b):
            if " " in w or "_" in w or "-" in w:
                return None
            if w in seen:
                i = seen[w]
                self.freq[i] += f
                self.logodds[i] = 0.5 * (self.logodds[i] + b)
                return i
            seen[w] = len(self.words)
            self.words.append(w)
            self.pos.append(pos)
            self.freq.append(f)
            self.logodds.append(b)
            return seen[w]

        for g in word_groups():
            if g.polarity:
                base_f = rng.uniform(3.0, 8.0)
                head_b = g.polarity * cfg.head_strength * rng.uniform(0.8, 1.3)
            else:
                base_f = rng.uniform(4.0, 12.0) if g.pos in (NOUN, VERB) else rng.uniform(3.0, 7.0)
                head_b = rng.normal(0.0, 0.35)
            hi = add(g.head, g.pos, base_f, head_b)
            if g.polarity and g.pos == ADJ and hi is not None:
                self.polar_adj[g.polarity].append(hi)
            for s in g.synonyms:
                r = rng.random()
                if r < cfg.rare_share:
                    f = base_f * rng.uniform(0.005, 0.03)  # rare: a handful of sightings
                else:
                    f = base_f * rng.uniform(0.05, 0.35)
                # synonyms keep a little of the head's polarity plus a word-specific bias
                keep = rng.uniform(-0.3, 0.6) if g.polarity else 0.0
                b = keep * head_b + rng.normal(0.0, cfg.bias_scale * (0.6 if g.polarity else 0.5))
                add(s, g.pos, f, b)
        self.freq_a = np.array(self.freq)
        self.logodds_a = np.array(self.logodds)

    def class_dist(self, sign: int) -> np.ndarray:
        w = self.freq_a * np.exp(sign * self.logodds_a / 2.0)
        return w / w.sum()


def generate_corpus(cfg: DeskConfig = DeskConfig()) -> tuple[list[tuple[str, str]], list[tuple[str, str]]]:
    """Return (train, test) lists of ``(label, text)``."""
    wm = _WordModel(cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    dists = {0: wm.class_dist(+1), 1: wm.class_dist(-1)}
    func = np.array(_FUNCTION_WORDS)
    func_p = 1.0 / np.arange(1, len(func) + 1)
    func_p /= func_p.sum()

    def doc(y: int) -> str:
        sign = 1 if y == 0 else -1
        n = int(rng.integers(cfg.min_len, cfg.max_len + 1))
        out: list[str] = []
        while len(out) < n:
            r = rng.random()
            if r < 0.42:
                out.append(str(func[rng.choice(len(func), p=func_p)]))
            elif r < 0.42 + cfg.negation_rate * 0.5:
                # negated adjective of the opposite polarity
                pool = wm.polar_adj[-sign]
                out += ["not", wm.words[pool[rng.integers(len(pool))]]]
            else:
                out.append(wm.words[rng.choice(len(wm.words), p=dists[y])])
            if rng.random() < 0.06:
                out.append(_PUNCT[rng.integers(len(_PUNCT))])
        out.append(".")
        return " ".join(out)

    def draw(n):
        rows = []
        for _ in range(n):
            y = int(rng.integers(2))
            text = doc(y)
            if rng.random() < cfg.label_noise:
                y = 1 - y
            rows.append((LABELS[y], text))
        return rows

    return draw(cfg.n_train), draw(cfg.n_test)


def embedding_lines(dim: int = 24, seed: int = 5) -> list[str]:
    """Synthetic pretrained vectors: members of a synonym group sit near a shared centroid."""
    vectors: dict[str, list[np.ndarray]] = {}
    for g in word_groups():
        centroid = _stable_rng(seed, "group", g.head).normal(0.0, 0.06, size=dim)
        for w in (g.head, *g.synonyms):
            if " " in w or "_" in w or "-" in w:
                continue
            noise = _stable_rng(seed, "word", w, g.head).normal(0.0, 0.02, size=dim)
            vectors.setdefault(w, []).append(centroid + noise)
    for w in [*_FUNCTION_WORDS, "not"]:
        vectors.setdefault(w, [_stable_rng(seed, "func", w).normal(0.0, 0.05, size=dim)])
    lines = []
    for w in sorted(vectors):
        v = np.mean(vectors[w], axis=0)
        lines.append(w + " " + " ".join(f"{x:.6f}" for x in v))
    return lines


def write_desk_assets(out_dir: str | Path, cfg: DeskConfig = DeskConfig(), dim: int = 24) -> dict[str, Path]:
    """Write corpus (``tsv-dir`` layout), lexicon, POS lexicon and vectors under ``out_dir``."""
    from .lexicon import parse_lexicon, write_pos_lexicon

    out = Path(out_dir)
    corpus_dir = out / "desk_mr"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    train, test = generate_corpus(cfg)
    for name, rows in (("train.tsv", train), ("test.tsv", test)):
        with open(corpus_dir / name, "w", encoding="utf-8") as fh:
            fh.writelines(f"{lab}\t{text}\n" for lab, text in rows)
    (corpus_dir / "labels.txt").write_text("\n".join(LABELS) + "\n", encoding="utf-8")
    lex_path = out / "lexicon.tsv"
    lines = lexicon_lines()
    lex_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    pos_path = out / "pos_lexicon.tsv"
    write_pos_lexicon(parse_lexicon(lines), pos_path)
    emb_path = out / "embeddings.txt"
    emb_path.write_text("\n".join(embedding_lines(dim)) + "\n", encoding="utf-8")
    cfg_path = out / "desk.yaml"
    cfg_path.write_text(yaml.safe_dump(desk_config(), sort_keys=False), encoding="utf-8")
    return {"corpus": corpus_dir, "lexicon": lex_path, "pos_lexicon": pos_path, "embeddings": emb_path,
            "config": cfg_path}


# Per-family training settings found to clear the 0.75 admission floor on the desk corpus.
TRAIN_OVERRIDES = [
    {"match": {"architecture": "LINEAR_BOW"}, "set": {"learning_rate": 0.3, "epochs": 16, "lr_decay": 0.3}},
    {"match": {"architecture": "AVG_EMB_MLP"}, "set": {"learning_rate": 0.5, "epochs": 16}},
    {"match": {"architecture": "AVG_EMB_MLP", "input_form": "CHAR_NGRAM"},
     "set": {"learning_rate": 1.0, "epochs": 20, "batch_size": 64, "lr_decay": 0.2}},
    {"match": {"architecture": "RECURRENT"}, "set": {"learning_rate": 0.5, "clip_norm": 1.0, "epochs": 12}},
    {"match": {"architecture": "RECURRENT", "input_form": "CHAR_NGRAM"},
     "set": {"learning_rate": 0.3, "epochs": 16}},
]


def desk_config(out_dir: str = "runs") -> dict:
    """Experiment config for the assets written by :func:`write_desk_assets` (paths relative)."""
    return {
        "data": {"corpus": "desk_mr", "format": "tsv-dir", "lexicon": "lexicon.tsv",
                 "pos_lexicon": "pos_lexicon.tsv", "embeddings": "embeddings.txt"},
        "train": {"defaults": {"dim": 24}, "overrides": TRAIN_OVERRIDES},
        "output_dir": out_dir,
    }
