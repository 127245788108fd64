int main(void) {
    int s = 0;
    int n = 0;
    while (n < 100) {
        s = 1 - s;
        if (s == 1) {
            n = n + 1;
        } else {
            n = n - 1;
        }
    }
    return n;
}
