#include <random>
#include <set>
#include <thread>

#include <gtest/gtest.h>

#include "speechgait/channels.hpp"
#include "speechgait/envelope.hpp"
#include "speechgait/latency.hpp"

using namespace speechgait;

TEST(BoundedQueue, FifoAndCapacity) {
  BoundedQueue<int> q(5);
  EXPECT_EQ(q.capacity(), 8u);
  for (int i = 0; i < 8; ++i)
    EXPECT_TRUE(q.try_push(i));
  EXPECT_FALSE(q.try_push(99));
  EXPECT_EQ(q.rejected(), 1u);
  for (int i = 0; i < 8; ++i)
    EXPECT_EQ(q.try_pop(), i);
  EXPECT_EQ(q.try_pop(), std::nullopt);
  EXPECT_THROW(BoundedQueue<int>(1), std::invalid_argument);
}

TEST(BoundedQueue, ConcurrentProducersLoseNothing) {
  BoundedQueue<int> q(1024);
  constexpr int kPerThread = 20000;
  std::vector<std::thread> producers;
  for (int p = 0; p < 4; ++p)
    producers.emplace_back([&q, p] {
      for (int i = 0; i < kPerThread; ++i)
        while (!q.try_push(p * kPerThread + i))
          std::this_thread::yield();
    });
  std::vector<int> last(4, -1);
  int received = 0;
  while (received < 4 * kPerThread) {
    if (auto v = q.try_pop()) {
      const int p = *v / kPerThread;
      ASSERT_GT(*v, last[p]);
      last[p] = *v;
      ++received;
    }
  }
  for (auto& t : producers)
    t.join();
  EXPECT_EQ(q.try_pop(), std::nullopt);
}

TEST(Broadcast, EverySubscriberSeesEverySample) {
  Broadcast<int> b(16);
  auto s1 = b.subscribe();
  auto s2 = b.subscribe();
  for (int i = 0; i < 10; ++i)
    b.publish(i);
  EXPECT_EQ(s1->drain(), s2->drain());
  EXPECT_EQ(b.subscribers(), 2u);
}

TEST(Broadcast, SlowSubscriberDropsOldest) {
  Broadcast<int> b(4);
  auto s = b.subscribe();
  for (int i = 0; i < 10; ++i)
    b.publish(i);
  EXPECT_EQ(s->drain(), (std::vector<int>{6, 7, 8, 9}));
  EXPECT_EQ(s->dropped(), 6u);
}

TEST(Broadcast, ExpiredSubscriptionsArePruned) {
  Broadcast<int> b(4);
  auto keep = b.subscribe();
  {
    auto gone = b.subscribe();
    b.publish(1);
  }
  b.publish(2);
  EXPECT_EQ(b.subscribers(), 1u);
  EXPECT_EQ(keep->pop(), 1);
  EXPECT_EQ(keep->pop(), 2);
  EXPECT_EQ(keep->pop(), std::nullopt);
}

TEST(Latency, DisabledDeliversOnArrivalTick) {
  LatencyLine<int> line(LatencyConfig{}, 0.01);
  EXPECT_EQ(line.schedule(1, 40), 40);
  EXPECT_TRUE(line.release(39).empty());
  EXPECT_EQ(line.release(40), std::vector<int>{1});
}

TEST(Latency, DrawIsQuantizedUpToTicks) {
  LatencyLine<int> line(LatencyConfig{}, 0.01);
  EXPECT_EQ(line.delay_ticks(743), 75);
  EXPECT_EQ(line.delay_ticks(740), 74);
  EXPECT_EQ(line.delay_ticks(500), 50);
  EXPECT_EQ(line.delay_ticks(1000), 100);
}

TEST(Latency, SeededDrawMatchesIndependentReplay) {
  LatencyConfig cfg;
  cfg.enabled = true;
  cfg.seed = 7;
  LatencyLine<int> line(cfg, 0.01);
  std::mt19937_64 replay(7);
  std::uniform_int_distribution<int> draw(500, 1000);
  std::int64_t last = 0;
  for (int i = 0; i < 200; ++i) {
    const std::int64_t now = 10 * i;
    const int ms = draw(replay);
    const std::int64_t due = line.schedule(i, now);
    EXPECT_EQ(line.last_delay_ms(), ms);
    const std::int64_t expected = std::max<std::int64_t>(now + (ms + 9) / 10, last);
    EXPECT_EQ(due, expected);
    EXPECT_GE(due - now, 50);
    last = due;
  }
  std::vector<int> all;
  for (std::int64_t t = 0; t <= last; ++t)
    for (int v : line.release(t))
      all.push_back(v);
  ASSERT_EQ(all.size(), 200u);
  for (int i = 0; i < 200; ++i)
    EXPECT_EQ(all[i], i);
}

TEST(Latency, ReorderAllowedOnlyWhenEnabled) {
  LatencyConfig cfg;
  cfg.enabled = true;
  cfg.allow_reorder = true;
  bool reordered = false;
  for (std::uint64_t seed = 0; seed < 20 && !reordered; ++seed) {
    cfg.seed = seed;
    LatencyLine<int> line(cfg, 0.01);
    line.schedule(0, 0);
    line.schedule(1, 1);
    const auto out = line.release(200);
    ASSERT_EQ(out.size(), 2u);
    reordered = out[0] == 1;
  }
  EXPECT_TRUE(reordered);
}

TEST(Envelope, ParsesWireFormat) {
  const auto env = parse_envelope(R"({"type":"text","payload":"robot walk","ts_ms":1700000000000,"seq":3})");
  EXPECT_EQ(env.type, CommandEnvelope::Type::text);
  EXPECT_EQ(env.payload, "robot walk");
  EXPECT_EQ(env.ts_ms, 1700000000000);
  EXPECT_EQ(env.seq, 3u);
  EXPECT_EQ(resolve(env, default_vocabulary()), Intent::walk);

  const auto typed = parse_envelope(R"({"type":"intent","payload":"SpeedUp"})");
  EXPECT_FALSE(typed.seq);
  EXPECT_EQ(resolve(typed, default_vocabulary()), Intent::speed_up);
  EXPECT_EQ(parse_envelope(serialize(env)).seq, env.seq);
}

TEST(Envelope, RejectsMalformed) {
  for (const char* bad : {"not json", "[1,2]", R"({"payload":"x"})", R"({"type":"voice","payload":"x"})",
                          R"({"type":"text"})", R"({"type":"text","payload":3})",
                          R"({"type":"text","payload":"x","seq":-1})", R"({"type":"text","payload":"x","ts_ms":"now"})"})
    EXPECT_THROW(parse_envelope(bad), ParseError) << bad;
  EXPECT_THROW(resolve(parse_envelope(R"({"type":"intent","payload":"dance"})"), default_vocabulary()), ParseError);
  EXPECT_EQ(resolve(parse_envelope(R"({"type":"text","payload":"hello"})"), default_vocabulary()), std::nullopt);
}

TEST(SequenceFilter, DuplicatesAndStaleArePerSender) {
  SequenceFilter f;
  CommandEnvelope e;
  e.seq = 5;
  EXPECT_EQ(f.check("a", e), SequenceFilter::Verdict::accepted);
  EXPECT_EQ(f.check("a", e), SequenceFilter::Verdict::duplicate);
  EXPECT_EQ(f.check("b", e), SequenceFilter::Verdict::accepted);
  e.seq = 4;
  EXPECT_EQ(f.check("a", e), SequenceFilter::Verdict::stale);
  e.seq = 6;
  EXPECT_EQ(f.check("a", e), SequenceFilter::Verdict::accepted);
  e.seq.reset();
  EXPECT_EQ(f.check("a", e), SequenceFilter::Verdict::accepted);
  EXPECT_EQ(f.check("a", e), SequenceFilter::Verdict::accepted);
  EXPECT_EQ(f.duplicates(), 1u);
  EXPECT_EQ(f.stale(), 1u);
  f.forget("a");
  e.seq = 1;
  EXPECT_EQ(f.check("a", e), SequenceFilter::Verdict::accepted);
}
