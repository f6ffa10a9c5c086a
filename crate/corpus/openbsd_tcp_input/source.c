typedef uint32_t tcp_seq;

struct tcpcb {
    tcp_seq rcv_nxt;
    tcp_seq snd_una;
};

struct tcphdr {
    tcp_seq th_seq;
    tcp_seq th_ack;
};

/* Trimming of duplicate data at the front of a segment. */
int tcp_trim_front(struct tcpcb *tp, struct tcphdr *th)
{
    int todrop = tp->rcv_nxt - th->th_seq;
    if (todrop > 0)
        return todrop;
    return 0;
}
