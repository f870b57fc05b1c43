#pragma once

// Bundled language tables: the stop-word list and the lemmatizer exception
// table. Both also ship as plain-text files under data/ (same content, one
// entry per line) so deployments can override them; the unit suite checks the
// two stay in sync.

namespace fedphish::wordlists {

inline constexpr const char* kStopwords = R"(a
about
above
across
after
again
against
all
almost
along
also
although
always
am
amid
among
an
and
another
any
anyone
are
around
as
at
be
because
been
before
behind
below
beneath
beside
besides
between
beyond
both
but
by
can
cannot
could
despite
did
do
does
doing
down
during
each
either
else
ever
every
except
few
for
from
further
had
has
have
having
he
her
here
hers
herself
him
himself
his
how
however
i
if
in
inside
into
is
it
its
itself
just
may
me
might
more
most
much
must
my
myself
near
neither
no
nor
not
now
of
off
on
once
only
onto
or
other
others
ought
our
ours
ourselves
out
outside
over
own
per
quite
rather
same
shall
she
should
since
so
some
someone
such
than
that
the
their
theirs
them
themselves
then
there
these
they
this
those
though
through
throughout
to
too
toward
towards
under
unless
until
unto
up
upon
very
via
was
we
were
what
when
where
whether
which
while
who
whom
whose
why
will
with
within
without
would
yet
you
your
yours
yourself
yourselves
)";

// "inflected base" pairs. Identity pairs pin words the suffix rules would
// otherwise mangle.
inline constexpr const char* kLemmaExceptions = R"(agreed agree
always always
anything anything
ate eat
avoided avoid
avoiding avoid
became become
becoming become
began begin
begun begin
believed believe
best good
better good
bigger big
biggest big
bored bore
bonuses bonus
bought buy
broke break
cheaper cheap
cheapest cheap
closer close
closest close
broken break
brought bring
built build
came come
caught catch
children child
chose choose
chosen choose
created create
creating create
crises crisis
data data
did do
died die
dies die
does do
done do
drawn draw
drew draw
driven drive
drove drive
during during
eaten eat
evening evening
everything everything
fallen fall
faster fast
fastest fast
fell fall
feet foot
felt feel
flew fly
flown fly
focused focus
focusing focus
forgot forget
forgotten forget
found find
gave give
geese goose
gone go
got get
gotten get
greater great
greatest great
grew grow
grown grow
halves half
heard hear
hotter hot
hottest hot
held hold
hid hide
hidden hide
higher high
highest high
hundred hundred
installed install
installing install
ignored ignore
ignoring ignore
indeed indeed
explored explore
exploring explore
restored restore
restoring restore
kept keep
knew know
knives knife
known know
larger large
largest large
later late
latest late
leaves leaf
led lead
lied lie
lies lie
lives life
longer long
longest long
lost lose
lower low
lowest low
made make
meant mean
men man
met meet
mice mouse
morning morning
newer new
newest new
news news
nothing nothing
older old
oldest old
paid pay
people people
perhaps perhaps
ran run
ridden ride
risen rise
rode ride
rose rise
safer safe
safest safe
said say
sat sit
saw see
scored score
seen see
sent send
series series
shelves shelf
shoes shoe
shorter short
shortest short
shown show
slower slow
slowest slow
smaller small
smallest small
sold sell
something something
species species
spent spend
spoke speak
spoken speak
stood stand
stronger strong
strongest strong
stored store
storing store
taken take
taught teach
teeth tooth
themselves themselves
thought think
threw throw
thrown throw
ties tie
toes toe
told tell
took take
tore tear
torn tear
understood understand
viruses virus
went go
wives wife
wolves wolf
women woman
won win
worse bad
worst bad
wore wear
worn wear
written write
wrote write
yourselves yourselves
ourselves ourselves
)";

}  // namespace fedphish::wordlists
