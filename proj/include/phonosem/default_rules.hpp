#pragma once

// Built-in copies of the rule files under data/. The files are the editable
// form; tests keep the two byte-identical.

#include <string_view>

namespace phonosem::defaults {

inline constexpr std::string_view inventory_tsv =
    R"(# symbol<TAB>category
# Constructed-word inventory: 15 consonants, 4 vowels. Order defines candidate order.
l	sonorant
m	sonorant
n	sonorant
v	voiced_fricative
ð	voiced_fricative
z	voiced_fricative
f	voiceless_fricative
s	voiceless_fricative
ʃ	voiceless_fricative
p	voiceless_stop
t	voiceless_stop
k	voiceless_stop
b	voiced_stop
d	voiced_stop
g	voiced_stop
i	front_vowel
ej	front_vowel
ɑ	back_vowel
ow	back_vowel
# Additional symbols seen in natural-language words (en, fr, ja, ko).
ɪ	other
e	other
ɛ	other
æ	other
a	other
ɯ	other
ɯ̃	other
u	other
ʊ	other
o	other
ʌ	other
ɔ	other
ə	other
ɨ	other
ɚ	other
ɐ	other
ɯː	other
aː	other
oː	other
iː	other
eː	other
c	other
ʒ	other
θ	other
ç	other
h	other
ɸ	other
ʁ	other
ɲ	other
ŋ	other
ɴ	other
ɾ	other
ɹ	other
r	other
j	other
ɰ	other
ɕ	other
ʑ	other
d͡ʑ	other
t͡ɕ	other
ʔ	other
w	other
ɥ	other
)";

inline constexpr std::string_view normalization_tsv =
    R"(# strip<TAB>mark
# allophone<TAB>from<TAB>to
# notation<TAB>from<TAB>to
strip	ˈ
strip	ˌ
strip	ː
strip	ˑ
allophone	ɫ	l
allophone	ɾ	l
notation	eɪ	ej
notation	oʊ	ow
notation	ɡ	g
)";

inline constexpr std::string_view romanization_tsv =
    R"(# onset<TAB>symbol<TAB>spelling
# nucleus<TAB>symbol<TAB>spelling
# syllable<TAB>C V<TAB>spelling            explicit rendering, wins over onset+nucleus
# override<TAB>initial|final|any<TAB>C V<TAB>spelling
# hyphenate<TAB>true|false
# no_hyphen_final<TAB>C V
onset	l	l
onset	m	m
onset	n	n
onset	v	v
onset	ð	th
onset	z	z
onset	f	f
onset	s	s
onset	ʃ	sh
onset	p	p
onset	t	t
onset	k	k
onset	b	b
onset	d	d
onset	g	g
nucleus	i	ee
nucleus	ej	ay
nucleus	ɑ	ah
nucleus	ow	o
syllable	g i	ghee
syllable	t ow	toe
syllable	d ow	doe
override	any	ð ow	though
override	final	ð i	they
hyphenate	true
no_hyphen_final	ð i
)";

inline constexpr std::string_view dimensions_tsv =
    R"(# feature_a<TAB>feature_b   (identifier is "feature_a-feature_b")
good	bad
beautiful	ugly
pleasant	unpleasant
strong	weak
big	small
rugged	delicate
active	passive
fast	slow
sharp	round
realistic	fantastical
structured	disorganized
ordinary	unique
interesting	uninteresting
simple	complex
abrupt	continuous
exciting	calming
hard	soft
happy	sad
harsh	mellow
heavy	light
inhibited	free
masculine	feminine
solid	nonsolid
tense	relaxed
dangerous	safe
)";

}  // namespace phonosem::defaults
