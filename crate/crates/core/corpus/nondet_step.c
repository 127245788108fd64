int main(void) {
    int x = nondet_int();
    while (x > 0) {
        int d = nondet_int();
        __VERIFIER_assume(d >= 0 && d <= 1);
        x = x - d;
    }
    return x;
}
