import org.junit.Test;

public class PollTest {
    @Test
    public void testPoll(){
       Snapshot s = sqlMng.createSnapshot();
       assertNotNull(s);
       String v = s.poll();
       assertEquals("8/22/2022",v);}
}
