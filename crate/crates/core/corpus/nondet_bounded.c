int main(void) {
    int x = 0;
    while (x < 8) {
        int d = nondet_int();
        __VERIFIER_assume(d >= 1 && d <= 3);
        x = x + d;
    }
    return x;
}
